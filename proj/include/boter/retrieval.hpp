#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boter/data_model.hpp"

namespace boter {

inline constexpr std::uint32_t kDefaultEmbeddingDim = 256;

struct Embedding {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Signed feature hashing of normalized unigrams and bigrams.
///
/// Each token t (a unigram, or "a_b" for the adjacent pair a, b) hashes to
/// h = fnv1a64(t). It adds sign(h) to bucket h % dimension, where sign is -1
/// when the top bit of h is set and +1 otherwise. Underscores never survive
/// normalization, so bigram keys cannot collide with unigrams. Empty text
/// encodes to the zero vector.
class HashingEncoder {
 public:
  explicit HashingEncoder(std::uint32_t dimension = kDefaultEmbeddingDim, bool cosine = false);

  Embedding encode(std::string_view text) const;

  std::uint32_t dimension() const { return dimension_; }
  bool cosine() const { return cosine_; }

  static std::size_t bucket(std::uint64_t hash, std::uint32_t dimension) { return hash % dimension; }
  static double sign(std::uint64_t hash) { return (hash >> 63) != 0 ? -1.0 : 1.0; }

 private:
  std::uint32_t dimension_;
  bool cosine_;
};

/// Retrieval query text: question, caption, labels, then OCR strings, joined
/// by single spaces and normalized. Field order is preserved as given.
std::string build_query(const Sample& sample);

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Ranked list, by nonincreasing score with ties broken by ascending doc id.
/// Selection output may reorder this; see select_top_t.
struct RankedDocs {
  std::vector<ScoredDoc> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<std::string> ids() const;

  friend bool operator==(const RankedDocs&, const RankedDocs&) = default;
};

/// Comparator for retrieval order.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) {
    return a.score > b.score;
  }
  return a.doc_id < b.doc_id;
}

/// Exact flat inner-product index. Rows are stored as 32-bit floats, matching
/// the on-disk format, so a loaded index scores identically to a built one.
class FlatIndex {
 public:
  FlatIndex() = default;
  FlatIndex(std::uint32_t dimension, std::vector<std::string> doc_ids, std::vector<float> matrix);

  static FlatIndex build(const Corpus& corpus, const HashingEncoder& encoder);

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return doc_ids_.size(); }
  std::span<const std::string> doc_ids() const { return doc_ids_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(matrix_).subspan(i * dimension_, dimension_);
  }

  /// Binary layout, little-endian: magic "BTIX", u32 version (1),
  /// u32 dimension, u64 count, then count doc ids (u32 length + UTF-8 bytes),
  /// then the count x dimension row-major float32 matrix.
  void save(const std::filesystem::path& path) const;
  static FlatIndex load(const std::filesystem::path& path);

  friend bool operator==(const FlatIndex&, const FlatIndex&) = default;

 private:
  std::uint32_t dimension_ = 0;
  std::vector<std::string> doc_ids_;
  std::vector<float> matrix_;
};

/// Inner product of a query with one stored row, accumulated in double in
/// component order.
double inner_product(std::span<const float> row, std::span<const double> query);

/// Top-k maximum inner product search. Returns min(k, index size) entries.
/// Throws ErrorKind::dimension_mismatch when the query dimension differs.
RankedDocs retrieve_top_k(const FlatIndex& index, const Embedding& query, std::size_t k);

/// Samples paired with their retrieved candidate documents.
struct CandidateSet {
  std::vector<Sample> samples;
  std::vector<RankedDocs> candidates;  // parallel to samples

  std::size_t size() const { return samples.size(); }
};

/// Encodes build_query(sample) for every sample and retrieves its top k.
CandidateSet retrieve_candidates(const FlatIndex& index, const HashingEncoder& encoder,
                                 std::span<const Sample> samples, std::size_t k);

}  // namespace boter
