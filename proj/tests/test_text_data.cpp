#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "boter/bootstrap.hpp"
#include "boter/data_model.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"
#include "boter/text.hpp"
#include "support.hpp"

namespace boter {
namespace {

using testing::TempDir;
using testing::write_text;

// ASCII-only reference: lowercase letters and digits survive, everything
// else separates tokens.
std::string ascii_reference(const std::string& raw) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) {
        out += ' ';
      }
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_text("Free-Style!!"), "free style");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("  Hello,\tWorld  "), "hello world");
}

TEST(Normalize, CompatibilityForms) {
  // Fullwidth letters and the "fi" ligature fold under NFKC.
  EXPECT_EQ(normalize_text("\xEF\xBC\xA1\xEF\xBC\xA2"), "ab");
  EXPECT_EQ(normalize_text("\xEF\xAC\x81sh"), "fish");
}

TEST(Normalize, MatchesAsciiReference) {
  Rng rng(3);
  const std::string alphabet = "abcXYZ019 -_!?.,'\"\t";
  for (int i = 0; i < 500; ++i) {
    std::string raw;
    const std::size_t n = rng.index(24);
    for (std::size_t j = 0; j < n; ++j) {
      raw += alphabet[rng.index(alphabet.size())];
    }
    EXPECT_EQ(normalize_text(raw), ascii_reference(raw)) << raw;
  }
}

TEST(Normalize, Idempotent) {
  Rng rng(5);
  const std::vector<std::string> pieces = {"a",  "Z", "9", " ", "-", "!", "\xC3\xA9", "\xEF\xBC\xA1",
                                           "\xEF\xAC\x81", "\t", "\xE2\x80\x94", "\xC3\x9F", "_", "."};
  for (int i = 0; i < 1000; ++i) {
    std::string raw;
    const std::size_t n = rng.index(16);
    for (std::size_t j = 0; j < n; ++j) {
      raw += pieces[rng.index(pieces.size())];
    }
    const std::string once = normalize_text(raw);
    EXPECT_EQ(normalize_text(once), once) << raw;
  }
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("bar", fnv1a64("foo")), fnv1a64("foobar"));
}

TEST(ContainsPhrase, TokenBoundaries) {
  EXPECT_TRUE(contains_phrase("the red car", "red car"));
  EXPECT_TRUE(contains_phrase("red", "red"));
  EXPECT_FALSE(contains_phrase("the redcar", "red"));
  EXPECT_FALSE(contains_phrase("bored", "red"));
  EXPECT_FALSE(contains_phrase("anything", ""));
}

// Count then lexicographic order, written independently of the library.
std::string modal_oracle(const std::vector<std::string>& answers) {
  std::map<std::string, int> counts;
  for (const auto& a : answers) {
    ++counts[normalize_text(a)];
  }
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [a, c] : counts) {
    ranked.emplace_back(-c, a);
  }
  std::sort(ranked.begin(), ranked.end());
  return ranked.front().second;
}

TEST(CanonicalAnswer, Examples) {
  EXPECT_EQ(canonical_answer(std::vector<std::string>{"freestyle", "freestyle", "surfing"}), "freestyle");
  EXPECT_EQ(canonical_answer(std::vector<std::string>{"a"}), "a");
  EXPECT_EQ(canonical_answer(std::vector<std::string>{"b", "a", "b", "a"}), "a");
  EXPECT_EQ(canonical_answer(std::vector<std::string>{"Free-Style", "free style", "x"}), "free style");
}

TEST(CanonicalAnswer, MatchesRecount) {
  Rng rng(9);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "B", "c!"};
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> answers(1 + rng.index(10));
    for (auto& a : answers) {
      a = pool[rng.index(pool.size())];
    }
    EXPECT_EQ(canonical_answer(answers), modal_oracle(answers));
    EXPECT_EQ(AnswerSet(answers).canonical(), modal_oracle(answers));
  }
}

TEST(CanonicalAnswer, EmptyThrows) {
  try {
    AnswerSet(std::vector<std::string>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_STREQ(e.what(), "empty answer set");
  }
}

TEST(Corpus, RejectsDuplicates) {
  EXPECT_THROW(Corpus({{"d1", "x"}, {"d1", "y"}}), Error);
  try {
    Corpus({{"d1", "x"}, {"d1", "y"}});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::duplicate_id);
  }
  const Corpus c({{"d1", "x"}, {"d2", "y"}});
  EXPECT_EQ(c.at("d2").text, "y");
  EXPECT_FALSE(c.find("d3").has_value());
}

const char* kThreeLines =
    R"({"id": "s1", "question": "What is this?", "answers": ["a", "a", "b"]}
{"id": "s2", "question": "Why?", "caption": "a dog", "labels": ["dog"], "ocr": ["stop"], "answers": ["c"], "query_features": [0.5, -1]}
{"id": "s3", "question": "Where?", "answers": ["d"]}
)";

TEST(Ingest, WellFormedFile) {
  TempDir dir;
  write_text(dir / "d.jsonl", kThreeLines);
  const auto samples = ingest_dataset(dir / "d.jsonl");
  ASSERT_EQ(samples.size(), 3U);
  EXPECT_EQ(samples[1].caption, "a dog");
  EXPECT_EQ(samples[1].object_labels, std::vector<std::string>{"dog"});
  EXPECT_EQ(samples[1].ocr_strings, std::vector<std::string>{"stop"});
  ASSERT_TRUE(samples[1].query_features.has_value());
  EXPECT_EQ(samples[1].query_features->size(), 2U);
}

TEST(Ingest, DuplicateIdOnSecondOccurrence) {
  TempDir dir;
  write_text(dir / "d.jsonl",
             "{\"id\": \"s1\", \"question\": \"q\", \"answers\": [\"a\"]}\n"
             "{\"id\": \"s1\", \"question\": \"q\", \"answers\": [\"a\"]}\n");
  try {
    ingest_dataset(dir / "d.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::duplicate_id);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Ingest, MissingAnswersNamesField) {
  TempDir dir;
  write_text(dir / "d.jsonl", "{\"id\": \"s1\", \"question\": \"q\"}\n");
  try {
    ingest_dataset(dir / "d.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("answers"), std::string::npos);
  }
}

TEST(Ingest, MissingFileAndBadJson) {
  TempDir dir;
  try {
    ingest_dataset(dir / "absent.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_file);
  }
  write_text(dir / "bad.jsonl", "{not json\n");
  try {
    ingest_dataset(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
  }
}

TEST(Ingest, QueryFeatureDimensionMismatch) {
  TempDir dir;
  write_text(dir / "d.jsonl",
             "{\"id\": \"s1\", \"question\": \"q\", \"answers\": [\"a\"], \"query_features\": [1, 2]}\n"
             "{\"id\": \"s2\", \"question\": \"q\", \"answers\": [\"a\"], \"query_features\": [1]}\n");
  try {
    ingest_dataset(dir / "d.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(Ingest, RoundTrips) {
  TempDir dir;
  const auto bench = generate_synthetic(testing::small_spec());
  write_dataset(dir / "train.jsonl", bench.train);
  write_corpus(dir / "corpus.jsonl", bench.corpus);
  write_oracle(dir / "oracle.jsonl", bench.oracle);
  EXPECT_EQ(ingest_dataset(dir / "train.jsonl"), bench.train);
  EXPECT_EQ(ingest_corpus(dir / "corpus.jsonl"), bench.corpus);
  EXPECT_EQ(ingest_oracle(dir / "oracle.jsonl"), bench.oracle);
}

TEST(Synthetic, Deterministic) {
  TempDir dir;
  const auto spec = testing::small_spec(21);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  write_dataset(dir / "a.jsonl", a.train);
  write_dataset(dir / "b.jsonl", b.train);
  write_corpus(dir / "ca.jsonl", a.corpus);
  write_corpus(dir / "cb.jsonl", b.corpus);
  EXPECT_EQ(testing::read_text(dir / "a.jsonl"), testing::read_text(dir / "b.jsonl"));
  EXPECT_EQ(testing::read_text(dir / "ca.jsonl"), testing::read_text(dir / "cb.jsonl"));
  EXPECT_EQ(a.oracle, b.oracle);

  auto other = spec;
  other.rng_seed = 22;
  EXPECT_NE(generate_synthetic(other).corpus, a.corpus);
}

TEST(Synthetic, PlantedCount) {
  SyntheticSpec spec;
  spec.rng_seed = 1;
  spec.n_samples = 10;
  spec.n_heldout = 4;
  spec.corpus_size = 100;
  spec.planted_per_sample = 3;
  const auto bench = generate_synthetic(spec);
  ASSERT_EQ(bench.train.size(), 10U);
  for (const auto& s : bench.train) {
    EXPECT_EQ(bench.oracle.positives(s.id).size(), 3U) << s.id;
  }
  for (const auto& s : bench.heldout) {
    EXPECT_EQ(bench.oracle.positives(s.id).size(), 3U) << s.id;
  }
}

TEST(Synthetic, PlantedContainAnswerAndNoiseRate) {
  SyntheticSpec spec;
  spec.rng_seed = 7;
  const auto bench = generate_synthetic(spec);
  std::set<std::string> planted;
  for (const auto* split : {&bench.train, &bench.heldout}) {
    for (const auto& s : *split) {
      for (const auto& id : bench.oracle.positives(s.id)) {
        planted.insert(id);
        EXPECT_TRUE(contains_any_answer(s, bench.corpus.at(id).text)) << s.id << " " << id;
        EXPECT_TRUE(contains_phrase(normalize_text(bench.corpus.at(id).text), AnswerSet(s.answers).canonical()));
      }
    }
  }
  std::size_t distractors = 0;
  std::size_t misleading = 0;
  for (const auto& d : bench.corpus.documents()) {
    if (planted.contains(d.id)) {
      continue;
    }
    ++distractors;
    const std::string text = normalize_text(d.text);
    misleading += std::any_of(bench.answer_vocab.begin(), bench.answer_vocab.end(),
                              [&](const std::string& a) { return contains_phrase(text, a); })
                      ? 1
                      : 0;
  }
  ASSERT_GT(distractors, 500U);
  const double rate = static_cast<double>(misleading) / static_cast<double>(distractors);
  EXPECT_NEAR(rate, spec.distractor_noise_rate, 0.05);
}

TEST(Synthetic, ValidatesSpec) {
  SyntheticSpec spec;
  spec.planted_per_sample = 0;
  EXPECT_THROW(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.corpus_size = 10;
  EXPECT_THROW(spec.validate(), Error);
  spec = SyntheticSpec{};
  spec.distractor_noise_rate = 1.5;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Synthetic, CanonicalAnswerIsModal) {
  const auto bench = generate_synthetic(testing::small_spec(4));
  for (const auto& s : bench.train) {
    EXPECT_EQ(AnswerSet(s.answers).canonical(), modal_oracle(s.answers));
  }
}

}  // namespace
}  // namespace boter
