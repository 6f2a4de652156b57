#include "boter/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"
#include "boter/text.hpp"

namespace boter {

using nlohmann::json;

Corpus::Corpus(std::vector<KnowledgeDocument> documents) : documents_(std::move(documents)) {
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& doc = documents_[i];
    if (doc.id.empty()) {
      throw Error(ErrorKind::invalid_argument, "document " + std::to_string(i) + " has an empty id");
    }
    if (doc.text.empty()) {
      throw Error(ErrorKind::invalid_argument, "document '" + doc.id + "' has empty text");
    }
    if (!by_id_.emplace(doc.id, i).second) {
      throw Error(ErrorKind::duplicate_id, "duplicate document id '" + doc.id + "'");
    }
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    return std::nullopt;
  }
  return it->second;
}

const KnowledgeDocument& Corpus::at(std::string_view id) const {
  auto i = find(id);
  if (!i) {
    throw Error(ErrorKind::invalid_argument, "unknown document id '" + std::string(id) + "'");
  }
  return documents_[*i];
}

AnswerSet::AnswerSet(std::span<const std::string> answers) {
  if (answers.empty()) {
    throw Error(ErrorKind::invalid_argument, "empty answer set");
  }
  entries_.reserve(answers.size());
  for (const auto& a : answers) {
    entries_.push_back(normalize_text(a));
  }
  std::map<std::string_view, std::size_t> counts;
  for (const auto& e : entries_) {
    ++counts[e];
  }
  // std::map iterates in ascending order, so the first maximum is the
  // lexicographically smallest one.
  std::size_t best = 0;
  for (const auto& [answer, n] : counts) {
    if (n > best) {
      best = n;
      canonical_ = std::string(answer);
    }
  }
}

std::size_t AnswerSet::count(std::string_view normalized) const {
  return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), normalized));
}

std::string canonical_answer(std::span<const std::string> answers) { return AnswerSet(answers).canonical(); }

void validate_dataset(std::span<const Sample> samples, std::optional<std::size_t> expected_dim) {
  std::set<std::string_view> seen;
  std::optional<std::size_t> dim = expected_dim;
  for (const auto& s : samples) {
    if (s.id.empty()) {
      throw Error(ErrorKind::invalid_argument, "sample with empty id");
    }
    if (!seen.insert(s.id).second) {
      throw Error(ErrorKind::duplicate_id, "duplicate sample id '" + s.id + "'");
    }
    if (s.answers.empty()) {
      throw Error(ErrorKind::invalid_argument, "sample '" + s.id + "' has an empty answer set");
    }
    if (s.query_features) {
      const auto& qf = *s.query_features;
      if (!dim) {
        dim = qf.size();
      }
      if (qf.size() != *dim) {
        throw Error(ErrorKind::dimension_mismatch, "sample '" + s.id + "' query_features has dimension " +
                                                       std::to_string(qf.size()) + ", expected " +
                                                       std::to_string(*dim));
      }
      if (!std::all_of(qf.begin(), qf.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorKind::invalid_argument, "sample '" + s.id + "' has non-finite query_features");
      }
    }
  }
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::missing_file, "cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::parse, where(path, line_no) + ": malformed record: " + e.what());
    }
    if (!record.is_object()) {
      throw Error(ErrorKind::parse, where(path, line_no) + ": record is not an object");
    }
    fn(record, line_no);
  }
}

std::string required_string(const json& r, const char* field, const std::string& loc) {
  auto it = r.find(field);
  if (it == r.end()) {
    throw Error(ErrorKind::parse, loc + ": missing field '" + field + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorKind::parse, loc + ": field '" + field + "' must be a string");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_array(const json& r, const char* field, const std::string& loc, bool required) {
  auto it = r.find(field);
  if (it == r.end() || it->is_null()) {
    if (required) {
      throw Error(ErrorKind::parse, loc + ": missing field '" + field + "'");
    }
    return {};
  }
  if (!it->is_array()) {
    throw Error(ErrorKind::parse, loc + ": field '" + field + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw Error(ErrorKind::parse, loc + ": field '" + field + "' must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

void append_line(std::string& out, const json& j) {
  out += j.dump();
  out += '\n';
}

}  // namespace

std::vector<Sample> ingest_dataset(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::vector<Sample> samples;
  std::set<std::string> ids;
  std::optional<std::size_t> dim = expected_dim;
  for_each_record(path, [&](const json& r, std::size_t line_no) {
    const std::string loc = where(path, line_no);
    Sample s;
    s.id = required_string(r, "id", loc);
    if (s.id.empty()) {
      throw Error(ErrorKind::parse, loc + ": field 'id' is empty");
    }
    s.question = required_string(r, "question", loc);
    if (auto it = r.find("caption"); it != r.end() && !it->is_null()) {
      s.caption = required_string(r, "caption", loc);
    }
    s.object_labels = string_array(r, "labels", loc, false);
    s.ocr_strings = string_array(r, "ocr", loc, false);
    s.answers = string_array(r, "answers", loc, true);
    if (s.answers.empty()) {
      throw Error(ErrorKind::parse, loc + ": field 'answers' is empty");
    }
    if (auto it = r.find("query_features"); it != r.end() && !it->is_null()) {
      if (!it->is_array()) {
        throw Error(ErrorKind::parse, loc + ": field 'query_features' must be an array");
      }
      std::vector<double> qf;
      for (const auto& v : *it) {
        if (!v.is_number()) {
          throw Error(ErrorKind::parse, loc + ": field 'query_features' must hold numbers");
        }
        qf.push_back(v.get<double>());
        if (!std::isfinite(qf.back())) {
          throw Error(ErrorKind::parse, loc + ": field 'query_features' has a non-finite value");
        }
      }
      if (!dim) {
        dim = qf.size();
      } else if (*dim != qf.size()) {
        throw Error(ErrorKind::dimension_mismatch, loc + ": query_features has dimension " +
                                                       std::to_string(qf.size()) + ", expected " +
                                                       std::to_string(*dim));
      }
      s.query_features = std::move(qf);
    }
    if (!ids.insert(s.id).second) {
      throw Error(ErrorKind::duplicate_id, loc + ": duplicate sample id '" + s.id + "'");
    }
    samples.push_back(std::move(s));
  });
  return samples;
}

Corpus ingest_corpus(const std::filesystem::path& path) {
  std::vector<KnowledgeDocument> docs;
  std::set<std::string> ids;
  for_each_record(path, [&](const json& r, std::size_t line_no) {
    const std::string loc = where(path, line_no);
    KnowledgeDocument d{required_string(r, "id", loc), required_string(r, "text", loc)};
    if (d.id.empty()) {
      throw Error(ErrorKind::parse, loc + ": field 'id' is empty");
    }
    if (d.text.empty()) {
      throw Error(ErrorKind::parse, loc + ": field 'text' is empty");
    }
    if (!ids.insert(d.id).second) {
      throw Error(ErrorKind::duplicate_id, loc + ": duplicate document id '" + d.id + "'");
    }
    docs.push_back(std::move(d));
  });
  return Corpus(std::move(docs));
}

void write_dataset(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::string out;
  for (const auto& s : samples) {
    json r = {{"id", s.id},
              {"question", s.question},
              {"caption", s.caption},
              {"labels", s.object_labels},
              {"ocr", s.ocr_strings},
              {"answers", s.answers}};
    if (s.query_features) {
      r["query_features"] = *s.query_features;
    }
    append_line(out, r);
  }
  binary::write_file(path, out);
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    append_line(out, json{{"id", d.id}, {"text", d.text}});
  }
  binary::write_file(path, out);
}

void OracleLabels::add(const std::string& sample_id, const std::string& doc_id) {
  auto& docs = positives_[sample_id];
  auto it = std::lower_bound(docs.begin(), docs.end(), doc_id);
  if (it == docs.end() || *it != doc_id) {
    docs.insert(it, doc_id);
  }
}

bool OracleLabels::has(std::string_view sample_id) const { return positives_.find(sample_id) != positives_.end(); }

bool OracleLabels::is_positive(std::string_view sample_id, std::string_view doc_id) const {
  auto it = positives_.find(sample_id);
  if (it == positives_.end()) {
    return false;
  }
  return std::binary_search(it->second.begin(), it->second.end(), doc_id);
}

std::span<const std::string> OracleLabels::positives(std::string_view sample_id) const {
  auto it = positives_.find(sample_id);
  if (it == positives_.end()) {
    throw Error(ErrorKind::invalid_argument, "no oracle labels for sample '" + std::string(sample_id) + "'");
  }
  return it->second;
}

OracleLabels ingest_oracle(const std::filesystem::path& path) {
  OracleLabels oracle;
  for_each_record(path, [&](const json& r, std::size_t line_no) {
    const std::string loc = where(path, line_no);
    const std::string sample_id = required_string(r, "sample_id", loc);
    for (const auto& doc_id : string_array(r, "doc_ids", loc, true)) {
      oracle.add(sample_id, doc_id);
    }
  });
  return oracle;
}

void write_oracle(const std::filesystem::path& path, const OracleLabels& oracle) {
  std::string out;
  for (const auto& [sample_id, docs] : oracle.table()) {
    append_line(out, json{{"sample_id", sample_id}, {"doc_ids", docs}});
  }
  binary::write_file(path, out);
}

}  // namespace boter
