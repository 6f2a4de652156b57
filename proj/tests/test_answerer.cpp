#include <gtest/gtest.h>

#include <cmath>

#include "boter/answerer.hpp"
#include "boter/bootstrap.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"
#include "boter/text.hpp"
#include "support.hpp"

namespace boter {
namespace {

const std::vector<std::string> kVocab = {"zebra", "Apple", "mango", "apple ", "kiwi"};

TrainConfig fast_config(std::size_t epochs = 20) {
  TrainConfig c;
  c.learning_rate = 0.2;
  c.warmup_steps = 0;
  c.epochs = epochs;
  c.batch_size = 4;
  c.rng_seed = 9;
  return c;
}

TEST(Answerer, BuildNormalizesAndSorts) {
  const auto m = AnswererModel::build(kVocab, 128);
  const std::vector<std::string> expected = {"apple", "kiwi", "mango", "zebra"};
  EXPECT_EQ(std::vector<std::string>(m.vocab().begin(), m.vocab().end()), expected);
  EXPECT_EQ(m.class_of("kiwi"), 1U);
  EXPECT_FALSE(m.class_of("pear").has_value());
  EXPECT_TRUE(m.scorer().has_shared());
  EXPECT_FALSE(AnswererModel::build(kVocab, 128, ChannelFlags::parse("document")).scorer().has_shared());
  EXPECT_THROW(AnswererModel::build(std::vector<std::string>{"", " "}), Error);
}

TEST(Answerer, UntrainedPredictsSmallestEntry) {
  const auto m = AnswererModel::build(kVocab, 128);
  const Sample s = testing::make_sample("s", "what fruit", {"kiwi"});
  EXPECT_EQ(m.predict(s, "a kiwi on the table"), "apple");
  std::vector<std::string> reversed(kVocab.rbegin(), kVocab.rend());
  EXPECT_EQ(AnswererModel::build(reversed, 128), m);
}

TEST(Answerer, InitialLossIsLnV) {
  auto m = AnswererModel::build(kVocab, 128);
  const Sample s = testing::make_sample("s", "what fruit", {"kiwi"});
  std::vector<AnswerTriple> triples = {{&s, "kiwi text", "kiwi"}, {&s, "zebra text", "zebra"}};
  auto c = fast_config(1);
  c.learning_rate = 0.0;
  const auto fit = train_answerer(m, triples, c);
  EXPECT_NEAR(fit.epoch_loss[0], std::log(4.0), 1e-12);
  EXPECT_EQ(m, AnswererModel::build(kVocab, 128));
}

TEST(Answerer, ZeroEpochsLeavesParameters) {
  auto m = AnswererModel::build(kVocab, 128);
  const Sample s = testing::make_sample("s", "q", {"kiwi"});
  std::vector<AnswerTriple> triples = {{&s, "kiwi", "kiwi"}};
  const auto fit = train_answerer(m, triples, fast_config(0));
  EXPECT_TRUE(fit.epoch_loss.empty());
  EXPECT_EQ(m, AnswererModel::build(kVocab, 128));
}

TEST(Answerer, SeparableTwoClasses) {
  for (const char* channels : {"question,document", "document,overlap,extra"}) {
    auto m = AnswererModel::build(std::vector<std::string>{"left", "right"}, 512, ChannelFlags::parse(channels));
    const Sample s = testing::make_sample("s", "which way", {"left"});
    std::vector<AnswerTriple> triples = {{&s, "north gate", "left"}, {&s, "south gate", "right"}};
    const auto fit = train_answerer(m, triples, fast_config(50));
    EXPECT_LT(fit.epoch_loss.back(), fit.epoch_loss.front()) << channels;
    EXPECT_EQ(m.predict(s, "north gate"), "left") << channels;
    EXPECT_EQ(m.predict(s, "south gate"), "right") << channels;
  }
}

TEST(Answerer, OutOfVocabularyTargetThrows) {
  auto m = AnswererModel::build(kVocab, 64);
  const Sample s = testing::make_sample("s", "q", {"pear"});
  std::vector<AnswerTriple> triples = {{&s, "pear", "pear"}};
  EXPECT_THROW(train_answerer(m, triples, fast_config(1)), Error);
}

TEST(Answerer, PredictionsStayInVocabulary) {
  Rng rng(4);
  auto m = AnswererModel::build(kVocab, 64);
  for (auto& h : m.scorer().heads) {
    for (auto& w : h.weights) {
      w = rng.normal();
    }
  }
  const Sample s = testing::make_sample("s", "q", {"x"});
  for (int i = 0; i < 50; ++i) {
    const auto& p = m.predict(s, "text " + std::to_string(rng.index(1000)));
    EXPECT_TRUE(m.class_of(p).has_value());
  }
}

TEST(Answerer, LearnsPlantedDocuments) {
  const auto bench = generate_synthetic(testing::small_spec());
  CycleConfig config;
  config.answerer_channels = ChannelFlags::parse("document,overlap,extra");
  const CycleData data = prepare_cycle_data(bench.train, bench.heldout, bench.corpus, config, &bench.oracle);
  std::vector<std::string> vocab;
  for (const auto& s : bench.train) {
    vocab.insert(vocab.end(), s.answers.begin(), s.answers.end());
  }
  auto m = AnswererModel::build(vocab, kDefaultFeatureDim, config.answerer_channels);
  std::vector<AnswerTriple> triples;
  for (const auto& s : bench.train) {
    for (const auto& id : bench.oracle.positives(s.id)) {
      triples.push_back({&s, bench.corpus.at(id).text, canonical_answer(s.answers)});
    }
  }
  auto c = fast_config(10);
  c.learning_rate = 0.05;
  train_answerer(m, triples, c);
  std::size_t right = 0;
  for (const auto& t : triples) {
    right += m.predict(*t.sample, t.knowledge) == t.target ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(right) / static_cast<double>(triples.size()), 0.9);
}

TEST(Answerer, RenderInput) {
  const auto m = AnswererModel::build(kVocab, 64);
  EXPECT_EQ(m.render_input(testing::make_sample("s", "why?", {"x"}), "because"),
            "Question: why? Knowledge: because Answer: ");
}

TEST(Answerer, CheckpointRoundTripWithSharedHead) {
  testing::TempDir dir;
  Rng rng(6);
  auto m = AnswererModel::build(kVocab, 32);
  for (auto& h : m.scorer().heads) {
    for (auto& w : h.weights) {
      w = static_cast<float>(rng.normal());
    }
  }
  for (auto& w : m.scorer().shared.weights) {
    w = static_cast<float>(rng.normal());
  }
  m.scorer().shared.bias = 0.25;
  save_checkpoint(dir / "a.bin", m.to_checkpoint());
  EXPECT_EQ(m.to_checkpoint().heads.size(), m.vocab().size() + 1);
  EXPECT_EQ(AnswererModel::from_checkpoint(load_checkpoint(dir / "a.bin")), m);

  auto ck = m.to_checkpoint();
  ck.heads.pop_back();
  EXPECT_THROW(AnswererModel::from_checkpoint(ck), Error);
}

std::vector<DocAnswer> answers(std::initializer_list<std::pair<const char*, double>> items) {
  std::vector<DocAnswer> out;
  int i = 0;
  for (const auto& [a, s] : items) {
    out.push_back({"d" + std::to_string(i++), a, s});
  }
  return out;
}

TEST(Vote, Examples) {
  EXPECT_EQ(majority_vote(answers({{"a", 0.1}, {"a", 0.1}, {"b", 0.9}})).final_answer, "a");
  EXPECT_EQ(majority_vote(answers({{"a", 0.9}, {"b", 0.4}})).final_answer, "a");
  EXPECT_EQ(majority_vote(answers({{"b", 0.4}, {"a", 0.9}})).final_answer, "a");
  EXPECT_EQ(majority_vote(answers({{"b", 0.9}, {"a", 0.4}})).final_answer, "b");
  EXPECT_EQ(majority_vote(answers({{"b", 0.5}, {"a", 0.5}})).final_answer, "a");
  EXPECT_EQ(majority_vote(answers({{"only", 0.0}})).final_answer, "only");
  try {
    majority_vote({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_STREQ(e.what(), "no documents to vote over");
  }
}

TEST(Vote, Properties) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DocAnswer> per_doc;
    const std::size_t n = 1 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) {
      per_doc.push_back({"d" + std::to_string(i), std::string(1, static_cast<char>('a' + rng.index(3))),
                         rng.uniform()});
    }
    const auto r = majority_vote(per_doc);
    std::size_t total = 0;
    for (const auto& [a, c] : r.tally) {
      total += c;
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(r.per_doc_answers, per_doc);
    const std::size_t best = r.tally.at(r.final_answer);
    for (const auto& [a, c] : r.tally) {
      EXPECT_LE(c, best);
    }
    // order of the documents does not matter
    auto shuffled = per_doc;
    rng.shuffle(std::span(shuffled));
    EXPECT_EQ(majority_vote(shuffled).final_answer, r.final_answer);
    // identical answers win outright
    auto same = per_doc;
    for (auto& d : same) {
      d.answer = "z";
    }
    EXPECT_EQ(majority_vote(same).final_answer, "z");
  }
}

TEST(Concat, SingleDocumentMatchesPerDocument) {
  Rng rng(2);
  auto m = AnswererModel::build(kVocab, 256);
  for (auto& h : m.scorer().heads) {
    for (auto& w : h.weights) {
      w = rng.normal();
    }
  }
  for (auto& w : m.scorer().shared.weights) {
    w = rng.normal();
  }
  const Sample s = testing::make_sample("s", "what fruit", {"kiwi"});
  const std::vector<KnowledgeDocument> docs = {{"d1", "kiwi grows here"}, {"d2", "zebra runs there"}};
  EXPECT_EQ(answer_concatenated(m, s, std::span(docs).first(1)), answer_with_document(m, s, docs[0]));
  const std::vector<KnowledgeDocument> swapped = {docs[1], docs[0]};
  // bigrams across the seam and neighbour words differ with the order
  EXPECT_NE(m.base_features(s, "kiwi grows here zebra runs there"),
            m.base_features(s, "zebra runs there kiwi grows here"));
  EXPECT_NE(m.pair_features("kiwi grows here zebra runs there"),
            m.pair_features("zebra runs there kiwi grows here"));
  EXPECT_EQ(answer_concatenated(m, s, docs), m.predict(s, "kiwi grows here zebra runs there"));
  EXPECT_EQ(answer_concatenated(m, s, swapped), m.predict(s, "zebra runs there kiwi grows here"));
  EXPECT_THROW(answer_concatenated(m, s, {}), Error);
}

TEST(AnswerMode, Names) {
  EXPECT_EQ(parse_answer_mode("vote"), AnswerMode::voting);
  EXPECT_EQ(parse_answer_mode("concat"), AnswerMode::concatenating);
  EXPECT_EQ(to_string(AnswerMode::concatenating), "concat");
  EXPECT_THROW(parse_answer_mode("mean"), Error);
}

}  // namespace
}  // namespace boter
