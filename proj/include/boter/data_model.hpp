#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace boter {

/// One question-answering instance. Visual information arrives as
/// pre-extracted text (caption, object labels, OCR strings) plus an optional
/// dense feature vector.
struct Sample {
  std::string id;
  std::string question;
  std::string caption;
  std::vector<std::string> object_labels;
  std::vector<std::string> ocr_strings;
  std::optional<std::vector<double>> query_features;
  std::vector<std::string> answers;  // human answers, with repetition

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct KnowledgeDocument {
  std::string id;
  std::string text;

  friend bool operator==(const KnowledgeDocument&, const KnowledgeDocument&) = default;
};

/// Immutable document collection with id lookup.
class Corpus {
 public:
  Corpus() = default;
  /// Throws ErrorKind::duplicate_id on repeated ids and
  /// ErrorKind::invalid_argument on empty ids or texts.
  explicit Corpus(std::vector<KnowledgeDocument> documents);

  std::span<const KnowledgeDocument> documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const KnowledgeDocument& operator[](std::size_t i) const { return documents_[i]; }
  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws ErrorKind::invalid_argument when the id is unknown.
  const KnowledgeDocument& at(std::string_view id) const;

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.documents_ == b.documents_; }

 private:
  std::vector<KnowledgeDocument> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Normalized human answers and their modal entry.
class AnswerSet {
 public:
  /// Throws ErrorKind::invalid_argument("empty answer set") when `answers` is empty.
  explicit AnswerSet(std::span<const std::string> answers);

  std::span<const std::string> entries() const { return entries_; }
  const std::string& canonical() const { return canonical_; }
  /// Occurrences of an already-normalized answer.
  std::size_t count(std::string_view normalized) const;

 private:
  std::vector<std::string> entries_;
  std::string canonical_;
};

/// Most frequent normalized answer; frequency ties go to the lexicographically
/// smallest candidate.
std::string canonical_answer(std::span<const std::string> answers);

/// Checks dataset invariants: nonempty unique ids, nonempty answers, finite
/// query features of one consistent dimension (or `expected_dim` if given).
void validate_dataset(std::span<const Sample> samples, std::optional<std::size_t> expected_dim = std::nullopt);

/// Line-delimited JSON readers. Errors name the line number and field.
std::vector<Sample> ingest_dataset(const std::filesystem::path& path,
                                   std::optional<std::size_t> expected_dim = std::nullopt);
Corpus ingest_corpus(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, std::span<const Sample> samples);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Planted (sample, document) pairs of a synthetic benchmark. Doc ids are
/// kept sorted per sample.
class OracleLabels {
 public:
  void add(const std::string& sample_id, const std::string& doc_id);
  bool has(std::string_view sample_id) const;
  bool is_positive(std::string_view sample_id, std::string_view doc_id) const;
  /// Throws ErrorKind::invalid_argument for an unknown sample.
  std::span<const std::string> positives(std::string_view sample_id) const;
  std::size_t sample_count() const { return positives_.size(); }
  const std::map<std::string, std::vector<std::string>, std::less<>>& table() const { return positives_; }

  friend bool operator==(const OracleLabels&, const OracleLabels&) = default;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> positives_;
};

OracleLabels ingest_oracle(const std::filesystem::path& path);
void write_oracle(const std::filesystem::path& path, const OracleLabels& oracle);

/// Parameters of the seeded synthetic benchmark. Entities (knowledge topics)
/// are shared by `samples_per_entity` samples, and their planted documents
/// are shared with them; train and held-out samples use disjoint entities.
struct SyntheticSpec {
  std::uint64_t rng_seed = 0;
  std::size_t n_samples = 500;   // training samples
  std::size_t n_heldout = 200;   // held-out samples
  std::size_t corpus_size = 2000;
  std::size_t planted_per_sample = 3;
  double distractor_noise_rate = 0.5;
  std::size_t answer_vocab_size = 40;
  std::size_t samples_per_entity = 2;
  std::size_t query_feature_dim = 8;

  /// Throws ErrorKind::invalid_argument on inconsistent sizes.
  void validate() const;
};

struct SyntheticBenchmark {
  std::vector<Sample> train;
  std::vector<Sample> heldout;
  Corpus corpus;
  OracleLabels oracle;
  std::vector<std::string> answer_vocab;
};

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec);

}  // namespace boter
