#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boter/bootstrap.hpp"

namespace boter {

/// One isolated seeded run. `series` and `x` place the cell in plot output;
/// cells of one sweep share a series.
struct AblationCell {
  std::string label;
  std::string series;
  double x = 0.0;
  CycleConfig config;
  TrainingMode training = TrainingMode::cycle;
};

struct AblationAxes {
  std::vector<SelectionMode> selection;
  std::vector<AnswerMode> answering;
  std::vector<LabelingMode> labeling;
  struct Budget {
    std::size_t k_candidate;
    std::size_t k_train;
    std::size_t k_test;
  };
  std::vector<Budget> budgets;
  std::vector<ChannelFlags> channels;
};

struct AblationGrid {
  std::vector<AblationCell> cells;

  /// Every combination of the axes over `base`; an empty axis keeps the base
  /// value.
  static AblationGrid cartesian(const CycleConfig& base, const AblationAxes& axes);
  /// Named protocol: selection, answering, training, labeling, k-sweep,
  /// channels, or all (their concatenation).
  static AblationGrid preset(std::string_view name, const CycleConfig& base);
  static std::vector<std::string> preset_names();
};

struct AblationResult {
  AblationCell cell;
  std::vector<CycleMetrics> history;  // empty when the cell failed
  std::optional<std::string> error;

  /// Metrics of the last completed cycle or phase.
  const CycleMetrics* final_metrics() const { return history.empty() ? nullptr : &history.back(); }
};

/// Runs every cell from scratch: its own index, candidates and models. A
/// cell that throws yields an error record and the grid continues.
std::vector<AblationResult> run_ablation(const AblationGrid& grid, std::span<const Sample> train,
                                         std::span<const Sample> heldout, const Corpus& corpus,
                                         const OracleLabels* oracle = nullptr);

/// results.tsv, results.jsonl, accuracy_vs_cycle.tsv and accuracy_vs_k.tsv
/// under `dir`. Plot files have columns x, y, series.
void write_ablation(const std::filesystem::path& dir, std::span<const AblationResult> results);

}  // namespace boter
