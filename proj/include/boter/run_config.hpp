#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "boter/bootstrap.hpp"
#include "boter/data_model.hpp"

namespace boter {

struct RunPaths {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> eval_dataset;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> oracle;
  std::optional<std::filesystem::path> index;
  std::optional<std::filesystem::path> checkpoints;
  std::optional<std::filesystem::path> output_dir;
};

/// Everything a command needs, read from a JSON file whose sections mirror
/// the fields here:
///
///   { "seed": 7,
///     "paths": { "dataset": ..., "eval_dataset": ..., "corpus": ..., "oracle": ...,
///                "index": ..., "checkpoints": ..., "output_dir": ... },
///     "retrieval": { "dim": 256, "cosine": false },
///     "feature_dim": 4096,
///     "cycle": { "mode": "cycle", "k_candidate": 30, "k_train": 5, "k_test": 5,
///                "n_cycles": 3, "selection": "selector", "answering": "vote",
///                "labeling": "conj" },
///     "channels": { "selector": "question,document,overlap,query-features,extra",
///                   "answerer": "document,overlap,extra",
///                   "query_features": true, "context": false },
///     "selector_train": { "learning_rate": ..., ... },
///     "answerer_train": { ... },
///     "synthetic": { "n_samples": 500, ... } }
///
/// Every key is optional. Relative paths resolve against the config file's
/// directory. The channel lists replace a model's channels; the two toggles
/// then switch one channel on both models.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  RunPaths paths;
  CycleConfig cycle;
  TrainingMode mode = TrainingMode::cycle;
  SyntheticSpec synthetic;

  static RunConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Propagates the global seed into the cycle, training and synthetic
  /// settings. Throws ErrorKind::config for a missing seed when `required`.
  void apply_seed(bool required);
  void set_channel(Channel channel, bool on);
  void validate() const;
};

}  // namespace boter
