#include "boter/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"
#include "boter/text.hpp"

namespace boter {

using nlohmann::json;

double vqa_accuracy(std::string_view prediction, const AnswerSet& answers) {
  const auto matches = answers.count(normalize_text(prediction));
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

double vqa_accuracy(std::string_view prediction, std::span<const std::string> answers) {
  return vqa_accuracy(prediction, AnswerSet(answers));
}

SampleResult answer_sample(const Sample& sample, const RankedDocs& candidates, const Corpus& corpus,
                           const SelectorModel& selector, const AnswererModel& answerer,
                           const InferenceConfig& config) {
  SampleResult result;
  result.sample_id = sample.id;
  result.selected =
      select_documents(config.selection, selector, sample, corpus, candidates, config.k_test, config.random_seed);
  if (config.answering == AnswerMode::voting) {
    std::vector<DocAnswer> per_doc;
    per_doc.reserve(result.selected.size());
    for (const auto& e : result.selected.entries) {
      per_doc.push_back({e.doc_id, answer_with_document(answerer, sample, corpus.at(e.doc_id)), e.score});
    }
    result.vote = majority_vote(per_doc);
    result.prediction = result.vote->final_answer;
  } else {
    std::vector<KnowledgeDocument> docs;
    docs.reserve(result.selected.size());
    for (const auto& e : result.selected.entries) {
      docs.push_back(corpus.at(e.doc_id));
    }
    result.prediction = answer_concatenated(answerer, sample, docs);
  }
  result.score = vqa_accuracy(result.prediction, sample.answers);
  return result;
}

EvalReport evaluate(const CandidateSet& split, const Corpus& corpus, const SelectorModel& selector,
                    const AnswererModel& answerer, const InferenceConfig& config) {
  if (config.k_test == 0) {
    throw Error(ErrorKind::invalid_argument, config.answering == AnswerMode::voting
                                                 ? "no documents to vote over"
                                                 : "no documents to concatenate");
  }
  EvalReport report;
  report.per_sample.reserve(split.size());
  double total = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    report.per_sample.push_back(
        answer_sample(split.samples[i], split.candidates[i], corpus, selector, answerer, config));
    total += report.per_sample.back().score;
  }
  report.mean_accuracy = split.size() == 0 ? 0.0 : total / static_cast<double>(split.size());
  return report;
}

SelectionQuality selection_quality(std::span<const std::string> sample_ids, std::span<const RankedDocs> selected,
                                   const OracleLabels& oracle) {
  if (sample_ids.size() != selected.size()) {
    throw Error(ErrorKind::invalid_argument, "selection_quality: one selection per sample required");
  }
  SelectionQuality q;
  if (sample_ids.empty()) {
    return q;
  }
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    if (!oracle.has(sample_ids[i])) {
      throw Error(ErrorKind::invalid_argument, "selection_quality: missing oracle labels for sample '" +
                                                   sample_ids[i] + "'");
    }
    const auto planted = oracle.positives(sample_ids[i]);
    std::set<std::string_view> chosen;
    for (const auto& e : selected[i].entries) {
      chosen.insert(e.doc_id);
    }
    const auto hits = static_cast<double>(std::count_if(
        chosen.begin(), chosen.end(), [&](std::string_view id) { return oracle.is_positive(sample_ids[i], id); }));
    q.precision_at_t += chosen.empty() ? 0.0 : hits / static_cast<double>(chosen.size());
    q.recall_at_t += planted.empty() ? 0.0 : hits / static_cast<double>(planted.size());
  }
  q.precision_at_t /= static_cast<double>(sample_ids.size());
  q.recall_at_t /= static_cast<double>(sample_ids.size());
  return q;
}

SelectionQuality selection_quality(const EvalReport& report, const OracleLabels& oracle) {
  std::vector<std::string> ids;
  std::vector<RankedDocs> selected;
  for (const auto& r : report.per_sample) {
    ids.push_back(r.sample_id);
    selected.push_back(r.selected);
  }
  return selection_quality(ids, selected, oracle);
}

void write_selections(const std::filesystem::path& path, const EvalReport& report) {
  std::string out;
  for (const auto& r : report.per_sample) {
    json scores = json::array();
    for (const auto& e : r.selected.entries) {
      scores.push_back(e.score);
    }
    out += json{{"sample_id", r.sample_id}, {"doc_ids", r.selected.ids()}, {"scores", scores}}.dump();
    out += '\n';
  }
  binary::write_file(path, out);
}

void write_predictions(const std::filesystem::path& path, const EvalReport& report) {
  std::string out;
  for (const auto& r : report.per_sample) {
    json rec = {{"sample_id", r.sample_id}, {"final_answer", r.prediction}, {"score", r.score}};
    json per_doc = json::array();
    json tally = json::object();
    if (r.vote) {
      for (const auto& d : r.vote->per_doc_answers) {
        per_doc.push_back({{"doc_id", d.doc_id}, {"answer", d.answer}, {"score", d.selector_score}});
      }
      for (const auto& [answer, n] : r.vote->tally) {
        tally[answer] = n;
      }
    }
    rec["per_doc"] = per_doc;
    rec["tally"] = tally;
    out += rec.dump();
    out += '\n';
  }
  binary::write_file(path, out);
}

std::string fingerprint(std::string_view canonical) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

}  // namespace boter
