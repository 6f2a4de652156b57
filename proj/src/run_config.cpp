#include "boter/run_config.hpp"

#include <initializer_list>
#include <string_view>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"

namespace boter {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) {
    throw Error(ErrorKind::config, "config section '" + std::string(section) + "' must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) {
      ok = ok || key == k;
    }
    if (!ok) {
      throw Error(ErrorKind::config, "unknown config key '" + std::string(section) + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view section) {
  const auto it = j.find(key);
  if (it == j.end()) {
    return;
  }
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, "config key '" + std::string(section) + "." + std::string(key) +
                                       "' has the wrong type");
  }
}

void read_train(const json& j, TrainConfig& c, std::string_view section) {
  reject_unknown(j, section,
                 {"learning_rate", "warmup_steps", "warmup_factor", "epochs", "batch_size", "rng_seed",
                  "positive_weight"});
  read(j, "learning_rate", c.learning_rate, section);
  read(j, "warmup_steps", c.warmup_steps, section);
  read(j, "warmup_factor", c.warmup_factor, section);
  read(j, "epochs", c.epochs, section);
  read(j, "batch_size", c.batch_size, section);
  read(j, "rng_seed", c.rng_seed, section);
  read(j, "positive_weight", c.positive_weight, section);
}

void read_path(const json& j, std::string_view key, std::optional<std::filesystem::path>& out,
               const std::filesystem::path& base) {
  std::string value;
  if (!j.contains(key)) {
    return;
  }
  read(j, key, value, "paths");
  std::filesystem::path p(value);
  out = p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("config: ") + e.what());
  }
  reject_unknown(j, "config",
                 {"seed", "paths", "retrieval", "feature_dim", "cycle", "channels", "selector_train",
                  "answerer_train", "synthetic"});
  RunConfig c;
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read(j, "seed", seed, "config");
    c.seed = seed;
  }
  if (auto it = j.find("paths"); it != j.end()) {
    reject_unknown(*it, "paths",
                   {"dataset", "eval_dataset", "corpus", "oracle", "index", "checkpoints", "output_dir"});
    read_path(*it, "dataset", c.paths.dataset, base_dir);
    read_path(*it, "eval_dataset", c.paths.eval_dataset, base_dir);
    read_path(*it, "corpus", c.paths.corpus, base_dir);
    read_path(*it, "oracle", c.paths.oracle, base_dir);
    read_path(*it, "index", c.paths.index, base_dir);
    read_path(*it, "checkpoints", c.paths.checkpoints, base_dir);
    read_path(*it, "output_dir", c.paths.output_dir, base_dir);
  }
  if (auto it = j.find("retrieval"); it != j.end()) {
    reject_unknown(*it, "retrieval", {"dim", "cosine"});
    read(*it, "dim", c.cycle.encoder_dim, "retrieval");
    read(*it, "cosine", c.cycle.cosine, "retrieval");
  }
  read(j, "feature_dim", c.cycle.feature_dim, "config");
  if (auto it = j.find("cycle"); it != j.end()) {
    reject_unknown(*it, "cycle",
                   {"mode", "k_candidate", "k_train", "k_test", "n_cycles", "selection", "answering", "labeling"});
    std::string name;
    if (it->contains("mode")) {
      read(*it, "mode", name, "cycle");
      c.mode = parse_training_mode(name);
    }
    read(*it, "k_candidate", c.cycle.k_candidate, "cycle");
    read(*it, "k_train", c.cycle.k_train, "cycle");
    read(*it, "k_test", c.cycle.k_test, "cycle");
    read(*it, "n_cycles", c.cycle.n_cycles, "cycle");
    if (it->contains("selection")) {
      read(*it, "selection", name, "cycle");
      c.cycle.selection = parse_selection_mode(name);
    }
    if (it->contains("answering")) {
      read(*it, "answering", name, "cycle");
      c.cycle.answering = parse_answer_mode(name);
    }
    if (it->contains("labeling")) {
      read(*it, "labeling", name, "cycle");
      c.cycle.labeling = parse_labeling_mode(name);
    }
  }
  if (auto it = j.find("channels"); it != j.end()) {
    reject_unknown(*it, "channels", {"selector", "answerer", "query_features", "context"});
    // Full lists first, then the two toggles, which apply to both models.
    std::string names;
    if (it->contains("selector")) {
      read(*it, "selector", names, "channels");
      c.cycle.selector_channels = ChannelFlags::parse(names);
    }
    if (it->contains("answerer")) {
      read(*it, "answerer", names, "channels");
      c.cycle.answerer_channels = ChannelFlags::parse(names);
    }
    bool on = false;
    if (it->contains("query_features")) {
      read(*it, "query_features", on, "channels");
      c.set_channel(Channel::query_features, on);
    }
    if (it->contains("context")) {
      read(*it, "context", on, "channels");
      c.set_channel(Channel::context, on);
    }
  }
  if (auto it = j.find("selector_train"); it != j.end()) {
    read_train(*it, c.cycle.selector_train, "selector_train");
  }
  if (auto it = j.find("answerer_train"); it != j.end()) {
    read_train(*it, c.cycle.answerer_train, "answerer_train");
  }
  if (auto it = j.find("synthetic"); it != j.end()) {
    auto& s = c.synthetic;
    reject_unknown(*it, "synthetic",
                   {"n_samples", "n_heldout", "corpus_size", "planted_per_sample", "distractor_noise_rate",
                    "answer_vocab_size", "samples_per_entity", "query_feature_dim"});
    read(*it, "n_samples", s.n_samples, "synthetic");
    read(*it, "n_heldout", s.n_heldout, "synthetic");
    read(*it, "corpus_size", s.corpus_size, "synthetic");
    read(*it, "planted_per_sample", s.planted_per_sample, "synthetic");
    read(*it, "distractor_noise_rate", s.distractor_noise_rate, "synthetic");
    read(*it, "answer_vocab_size", s.answer_vocab_size, "synthetic");
    read(*it, "samples_per_entity", s.samples_per_entity, "synthetic");
    read(*it, "query_feature_dim", s.query_feature_dim, "synthetic");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json_text(binary::read_file(path), path.parent_path());
}

void RunConfig::apply_seed(bool required) {
  if (!seed) {
    if (required) {
      throw Error(ErrorKind::config, "a seed is required (--seed or \"seed\" in the config)");
    }
    return;
  }
  cycle.random_seed = derive_seed(*seed, "selection");
  cycle.selector_train.rng_seed = derive_seed(*seed, "selector");
  cycle.answerer_train.rng_seed = derive_seed(*seed, "answerer");
  synthetic.rng_seed = *seed;
}

void RunConfig::set_channel(Channel channel, bool on) {
  cycle.selector_channels = cycle.selector_channels.set(channel, on);
  cycle.answerer_channels = cycle.answerer_channels.set(channel, on);
}

void RunConfig::validate() const {
  cycle.validate();
  synthetic.validate();
}

}  // namespace boter
