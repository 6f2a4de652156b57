#include "boter/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"
#include "boter/text.hpp"

namespace boter {

namespace {
constexpr std::string_view kIndexMagic = "BTIX";
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

HashingEncoder::HashingEncoder(std::uint32_t dimension, bool cosine) : dimension_(dimension), cosine_(cosine) {
  if (dimension == 0) {
    throw Error(ErrorKind::invalid_argument, "encoder dimension must be positive");
  }
}

Embedding HashingEncoder::encode(std::string_view text) const {
  Embedding e{std::vector<double>(dimension_, 0.0)};
  const auto tokens = tokenize(text);
  auto add = [&](std::string_view token) {
    const std::uint64_t h = fnv1a64(token);
    e.values[bucket(h, dimension_)] += sign(h);
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i]);
    if (i + 1 < tokens.size()) {
      add(tokens[i] + "_" + tokens[i + 1]);
    }
  }
  if (cosine_) {
    const double norm = std::sqrt(std::inner_product(e.values.begin(), e.values.end(), e.values.begin(), 0.0));
    if (norm > 0.0) {
      for (auto& v : e.values) {
        v /= norm;
      }
    }
  }
  return e;
}

std::string build_query(const Sample& sample) {
  std::string q = sample.question;
  auto append = [&q](std::string_view part) {
    if (part.empty()) {
      return;
    }
    if (!q.empty()) {
      q += ' ';
    }
    q += part;
  };
  append(sample.caption);
  for (const auto& l : sample.object_labels) {
    append(l);
  }
  for (const auto& o : sample.ocr_strings) {
    append(o);
  }
  return normalize_text(q);
}

std::vector<std::string> RankedDocs::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(e.doc_id);
  }
  return out;
}

FlatIndex::FlatIndex(std::uint32_t dimension, std::vector<std::string> doc_ids, std::vector<float> matrix)
    : dimension_(dimension), doc_ids_(std::move(doc_ids)), matrix_(std::move(matrix)) {
  if (matrix_.size() != doc_ids_.size() * static_cast<std::size_t>(dimension_)) {
    throw Error(ErrorKind::dimension_mismatch, "index matrix size does not match doc count x dimension");
  }
}

FlatIndex FlatIndex::build(const Corpus& corpus, const HashingEncoder& encoder) {
  std::vector<std::string> ids;
  std::vector<float> matrix;
  ids.reserve(corpus.size());
  matrix.reserve(corpus.size() * encoder.dimension());
  for (const auto& doc : corpus.documents()) {
    ids.push_back(doc.id);
    for (double v : encoder.encode(doc.text).values) {
      matrix.push_back(static_cast<float>(v));
    }
  }
  return FlatIndex(encoder.dimension(), std::move(ids), std::move(matrix));
}

void FlatIndex::save(const std::filesystem::path& path) const {
  std::string out;
  out.append(kIndexMagic);
  binary::put_u32(out, kIndexVersion);
  binary::put_u32(out, dimension_);
  binary::put_u64(out, doc_ids_.size());
  for (const auto& id : doc_ids_) {
    binary::put_string(out, id);
  }
  for (float v : matrix_) {
    binary::put_f32(out, v);
  }
  binary::write_file(path, out);
}

FlatIndex FlatIndex::load(const std::filesystem::path& path) {
  binary::Reader in(binary::read_file(path), path.string());
  if (in.raw(kIndexMagic.size()) != kIndexMagic) {
    throw Error(ErrorKind::parse, path.string() + ": not an index file");
  }
  if (const auto version = in.u32(); version != kIndexVersion) {
    throw Error(ErrorKind::parse, path.string() + ": unsupported index version " + std::to_string(version));
  }
  const std::uint32_t dimension = in.u32();
  const std::uint64_t count = in.u64();
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ids.push_back(in.string());
  }
  std::vector<float> matrix(count * dimension);
  for (auto& v : matrix) {
    v = in.f32();
  }
  if (!in.at_end()) {
    throw Error(ErrorKind::parse, path.string() + ": trailing bytes in index file");
  }
  return FlatIndex(dimension, std::move(ids), std::move(matrix));
}

double inner_product(std::span<const float> row, std::span<const double> query) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    s += static_cast<double>(row[j]) * query[j];
  }
  return s;
}

RankedDocs retrieve_top_k(const FlatIndex& index, const Embedding& query, std::size_t k) {
  if (query.dimension() != index.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "query dimension " + std::to_string(query.dimension()) +
                                                   " does not match index dimension " +
                                                   std::to_string(index.dimension()));
  }
  RankedDocs out;
  k = std::min(k, index.size());
  if (k == 0) {
    return out;
  }
  const auto ids = index.doc_ids();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    scored.emplace_back(inner_product(index.row(i), query.values), i);
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [&ids](const auto& a, const auto& b) {
                      if (a.first != b.first) {
                        return a.first > b.first;
                      }
                      return ids[a.second] < ids[b.second];
                    });
  out.entries.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    out.entries.push_back({ids[scored[r].second], scored[r].first});
  }
  return out;
}

CandidateSet retrieve_candidates(const FlatIndex& index, const HashingEncoder& encoder,
                                 std::span<const Sample> samples, std::size_t k) {
  CandidateSet set;
  set.samples.assign(samples.begin(), samples.end());
  set.candidates.reserve(samples.size());
  for (const auto& s : samples) {
    set.candidates.push_back(retrieve_top_k(index, encoder.encode(build_query(s)), k));
  }
  return set;
}

}  // namespace boter
