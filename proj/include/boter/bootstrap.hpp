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
#include "boter/eval.hpp"
#include "boter/learner.hpp"
#include "boter/retrieval.hpp"
#include "boter/selector.hpp"

namespace boter {

enum class LabelingMode { predictions_and_weak, predictions_only };

std::string_view to_string(LabelingMode mode);
LabelingMode parse_labeling_mode(std::string_view name);

enum class LabelReason { correct_and_contains, wrong_answer, no_containment, both_failed };

std::string_view to_string(LabelReason reason);

struct PseudoLabel {
  std::string sample_id;
  std::string doc_id;
  int label = 0;  // 1 = yes
  LabelReason reason = LabelReason::both_failed;

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

/// Whether the normalized document text holds any normalized answer of the
/// sample on token boundaries.
bool contains_any_answer(const Sample& sample, std::string_view doc_text);

/// Labels each retrieved document yes when the answerer, given only that
/// document, predicts the canonical answer and the document contains one of
/// the sample's answers. predictions_only drops the containment test; the
/// reason still records both predicates.
std::vector<PseudoLabel> pseudo_label(const AnswererModel& answerer, const Sample& sample, const Corpus& corpus,
                                      const RankedDocs& retrieved,
                                      LabelingMode mode = LabelingMode::predictions_and_weak);

enum class TrainingMode { cycle, independent };

std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view name);

struct CycleConfig {
  std::size_t k_candidate = 30;
  std::size_t k_train = 5;
  std::size_t k_test = 5;
  std::size_t n_cycles = 3;
  LabelingMode labeling = LabelingMode::predictions_and_weak;
  SelectionMode selection = SelectionMode::selector;
  AnswerMode answering = AnswerMode::voting;
  std::uint64_t random_seed = 0;
  TrainConfig selector_train;
  TrainConfig answerer_train;
  ChannelFlags selector_channels = ChannelFlags::defaults();
  ChannelFlags answerer_channels = ChannelFlags::defaults();
  std::uint32_t feature_dim = kDefaultFeatureDim;
  std::uint32_t encoder_dim = kDefaultEmbeddingDim;
  bool cosine = false;

  void validate() const;
  InferenceConfig inference() const;
  /// Canonical JSON text of every field, the input to fingerprint().
  std::string canonical() const;
};

struct CycleMetrics {
  std::size_t cycle = 0;
  double accuracy = 0.0;
  std::optional<double> precision_at_t;
  std::optional<double> recall_at_t;
  double label_positive_rate = 0.0;
  std::size_t label_count = 0;
  std::size_t triple_count = 0;
  TrainingMode training = TrainingMode::cycle;
  std::string fingerprint;

  /// Pretty-printed JSON with the mode tags of `config`.
  std::string to_json(const CycleConfig& config) const;
};

struct TrainingPass {
  std::string module;  // "answerer" or "selector"
  FitResult fit;
};

struct CycleState {
  std::size_t cycle_index = 0;
  SelectorModel selector;
  AnswererModel answerer;
  std::vector<PseudoLabel> labels;
  CycleMetrics metrics;
  std::vector<TrainingPass> passes;  // in execution order
};

/// Corpus, retrieved candidates for both splits and optional oracle labels:
/// everything a run reads.
struct CycleData {
  const Corpus* corpus = nullptr;
  CandidateSet train;
  CandidateSet heldout;
  const OracleLabels* oracle = nullptr;
};

/// Builds the index with the configured encoder and retrieves k_candidate
/// documents for every sample of both splits.
CycleData prepare_cycle_data(std::span<const Sample> train, std::span<const Sample> heldout, const Corpus& corpus,
                             const CycleConfig& config, const OracleLabels* oracle = nullptr);
/// Same, against a prebuilt index.
CycleData prepare_cycle_data(std::span<const Sample> train, std::span<const Sample> heldout, const Corpus& corpus,
                             const FlatIndex& index, const CycleConfig& config, const OracleLabels* oracle = nullptr);

/// Untrained models sized from the config; the answer vocabulary is every
/// answer string of the training split.
CycleState initial_state(const CycleData& data, const CycleConfig& config);

/// (sample, selected document, canonical answer) for k_train documents of
/// every training sample.
std::vector<AnswerTriple> build_answer_triples(const CycleState& state, const CycleData& data,
                                               const CycleConfig& config, SelectionMode selection);

/// Selects k_train documents per training sample and fits the answerer on
/// the resulting triples. `round` names the training round whose shuffling
/// seed the pass uses; it defaults to the state's cycle index.
void run_stage1(CycleState& state, const CycleData& data, const CycleConfig& config,
                std::optional<SelectionMode> selection = std::nullopt,
                std::optional<std::size_t> round = std::nullopt);
/// Pseudo-labels all k_candidate documents per training sample with the
/// current answerer and fits the selector on them.
void run_stage2(CycleState& state, const CycleData& data, const CycleConfig& config,
                std::optional<std::size_t> round = std::nullopt);

/// Evaluates the state on the held-out split and fills its metrics.
EvalReport evaluate_state(CycleState& state, const CycleData& data, const CycleConfig& config);

struct RunOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Cycle 0 evaluates the untrained models; cycles 1..n_cycles each run
/// stage 1 then stage 2 over the whole training split, continuing from the
/// previous parameters, and evaluate afterwards.
std::vector<CycleState> run_cycles(const CycleData& data, const CycleConfig& config, const RunOptions& options = {});

/// The three training passes of the independent baseline: answerer on DPR
/// top-t, selector on its pseudo-labels, answerer again on the selector's
/// picks. Returns one state per pass. The passes are seeded like the first
/// three passes of a cycle run.
std::vector<CycleState> run_independent_phases(const CycleData& data, const CycleConfig& config,
                                               const RunOptions& options = {});
CycleState run_independent(const CycleData& data, const CycleConfig& config, const RunOptions& options = {});

/// Writes cycle_<n>/{selector.bin, answerer.bin, labels.jsonl, metrics.json}.
void write_cycle_checkpoint(const std::filesystem::path& dir, const CycleState& state, const CycleConfig& config);
void write_labels(const std::filesystem::path& path, std::span<const PseudoLabel> labels);

}  // namespace boter
