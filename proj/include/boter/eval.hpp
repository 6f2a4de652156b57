#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boter/answerer.hpp"
#include "boter/data_model.hpp"
#include "boter/retrieval.hpp"
#include "boter/selector.hpp"

namespace boter {

/// Soft VQA accuracy: min(#matches / 3, 1), comparing normalized strings.
double vqa_accuracy(std::string_view prediction, const AnswerSet& answers);
/// Throws ErrorKind::invalid_argument("empty answer set") on an empty list.
double vqa_accuracy(std::string_view prediction, std::span<const std::string> answers);

/// How documents are chosen and answers produced at inference time.
struct InferenceConfig {
  std::size_t k_test = 5;
  SelectionMode selection = SelectionMode::selector;
  AnswerMode answering = AnswerMode::voting;
  std::uint64_t random_seed = 0;
};

struct SampleResult {
  std::string sample_id;
  std::string prediction;
  double score = 0.0;
  RankedDocs selected;
  std::optional<VoteResult> vote;  // voting mode only
};

struct EvalReport {
  double mean_accuracy = 0.0;
  std::vector<SampleResult> per_sample;
  std::string config_fingerprint;
};

/// Per-sample answer under an inference config. Voting answers with each
/// selected document and reduces by majority_vote; concatenating answers
/// once over the joined texts.
SampleResult answer_sample(const Sample& sample, const RankedDocs& candidates, const Corpus& corpus,
                           const SelectorModel& selector, const AnswererModel& answerer,
                           const InferenceConfig& config);

/// Selects k_test documents per sample, answers, scores each prediction
/// with vqa_accuracy and averages. Throws for k_test == 0 since no documents
/// remain to answer from.
EvalReport evaluate(const CandidateSet& split, const Corpus& corpus, const SelectorModel& selector,
                    const AnswererModel& answerer, const InferenceConfig& config);

struct SelectionQuality {
  double precision_at_t = 0.0;
  double recall_at_t = 0.0;
};

/// Macro-averaged set precision |S n P| / |S| and recall |S n P| / |P| of
/// selected ids S against planted ids P. Throws when a sample lacks oracle
/// labels.
SelectionQuality selection_quality(std::span<const std::string> sample_ids, std::span<const RankedDocs> selected,
                                   const OracleLabels& oracle);
SelectionQuality selection_quality(const EvalReport& report, const OracleLabels& oracle);

/// Line-delimited dumps: {sample_id, doc_ids, scores} and
/// {sample_id, final_answer, score, per_doc, tally}.
void write_selections(const std::filesystem::path& path, const EvalReport& report);
void write_predictions(const std::filesystem::path& path, const EvalReport& report);

/// 16 hex digits of fnv1a64 over a canonical description.
std::string fingerprint(std::string_view canonical);

}  // namespace boter
