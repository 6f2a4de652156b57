#include "boter/bootstrap.hpp"

#include <set>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"
#include "boter/text.hpp"

namespace boter {

using nlohmann::ordered_json;

std::string_view to_string(LabelingMode mode) {
  return mode == LabelingMode::predictions_and_weak ? "conj" : "pred-only";
}

LabelingMode parse_labeling_mode(std::string_view name) {
  if (name == "conj" || name == "predictions_and_weak") return LabelingMode::predictions_and_weak;
  if (name == "pred-only" || name == "predictions_only") return LabelingMode::predictions_only;
  throw Error(ErrorKind::config, "unknown labeling mode '" + std::string(name) + "'");
}

std::string_view to_string(LabelReason reason) {
  switch (reason) {
    case LabelReason::correct_and_contains: return "correct_and_contains";
    case LabelReason::wrong_answer: return "wrong_answer";
    case LabelReason::no_containment: return "no_containment";
    case LabelReason::both_failed: return "both_failed";
  }
  return "both_failed";
}

std::string_view to_string(TrainingMode mode) {
  return mode == TrainingMode::cycle ? "cycle" : "independent";
}

TrainingMode parse_training_mode(std::string_view name) {
  if (name == "cycle") return TrainingMode::cycle;
  if (name == "independent") return TrainingMode::independent;
  throw Error(ErrorKind::config, "unknown training mode '" + std::string(name) + "'");
}

bool contains_any_answer(const Sample& sample, std::string_view doc_text) {
  const std::string text = normalize_text(doc_text);
  std::set<std::string> seen;
  for (const auto& a : sample.answers) {
    auto n = normalize_text(a);
    if (seen.insert(n).second && contains_phrase(text, n)) {
      return true;
    }
  }
  return false;
}

std::vector<PseudoLabel> pseudo_label(const AnswererModel& answerer, const Sample& sample, const Corpus& corpus,
                                      const RankedDocs& retrieved, LabelingMode mode) {
  const std::string target = AnswerSet(sample.answers).canonical();
  std::vector<PseudoLabel> out;
  out.reserve(retrieved.size());
  for (const auto& entry : retrieved.entries) {
    const auto& doc = corpus.at(entry.doc_id);
    const bool correct = answer_with_document(answerer, sample, doc) == target;
    const bool contains = contains_any_answer(sample, doc.text);
    PseudoLabel l{sample.id, doc.id, 0, LabelReason::both_failed};
    if (correct && contains) {
      l.reason = LabelReason::correct_and_contains;
    } else if (correct) {
      l.reason = LabelReason::no_containment;
    } else if (contains) {
      l.reason = LabelReason::wrong_answer;
    }
    l.label = (correct && (contains || mode == LabelingMode::predictions_only)) ? 1 : 0;
    out.push_back(std::move(l));
  }
  return out;
}

void CycleConfig::validate() const {
  if (k_candidate == 0) {
    throw Error(ErrorKind::config, "k_candidate must be positive");
  }
  if (k_train == 0 || k_train > k_candidate) {
    throw Error(ErrorKind::config, "k_train must be in [1, k_candidate]");
  }
  if (k_test > k_candidate) {
    throw Error(ErrorKind::config, "k_test must not exceed k_candidate");
  }
  if (feature_dim == 0 || encoder_dim == 0) {
    throw Error(ErrorKind::config, "feature and encoder dimensions must be positive");
  }
  selector_train.validate();
  answerer_train.validate();
}

InferenceConfig CycleConfig::inference() const {
  return InferenceConfig{k_test, selection, answering, random_seed};
}

namespace {

ordered_json train_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"warmup_steps", c.warmup_steps},
          {"warmup_factor", c.warmup_factor}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"rng_seed", c.rng_seed},
          {"positive_weight", c.positive_weight}};
}

// Each training pass gets its own shuffle stream.
TrainConfig pass_config(TrainConfig base, std::string_view module, std::size_t cycle) {
  base.rng_seed = derive_seed(base.rng_seed, std::string(module) + "/" + std::to_string(cycle));
  return base;
}

}  // namespace

std::string CycleConfig::canonical() const {
  ordered_json j = {{"k_candidate", k_candidate},
                    {"k_train", k_train},
                    {"k_test", k_test},
                    {"n_cycles", n_cycles},
                    {"labeling", to_string(labeling)},
                    {"selection", to_string(selection)},
                    {"answering", to_string(answering)},
                    {"random_seed", random_seed},
                    {"selector_train", train_json(selector_train)},
                    {"answerer_train", train_json(answerer_train)},
                    {"selector_channels", selector_channels.to_string()},
                    {"answerer_channels", answerer_channels.to_string()},
                    {"feature_dim", feature_dim},
                    {"encoder_dim", encoder_dim},
                    {"cosine", cosine}};
  return j.dump();
}

std::string CycleMetrics::to_json(const CycleConfig& config) const {
  ordered_json j = {{"cycle", cycle},
                    {"accuracy", accuracy},
                    {"precision_at_t", precision_at_t ? ordered_json(*precision_at_t) : ordered_json(nullptr)},
                    {"recall_at_t", recall_at_t ? ordered_json(*recall_at_t) : ordered_json(nullptr)},
                    {"label_positive_rate", label_positive_rate},
                    {"label_count", label_count},
                    {"triple_count", triple_count},
                    {"mode", to_string(training)},
                    {"selection", to_string(config.selection)},
                    {"answering", to_string(config.answering)},
                    {"labeling", to_string(config.labeling)},
                    {"k_candidate", config.k_candidate},
                    {"k_train", config.k_train},
                    {"k_test", config.k_test},
                    {"param_init", "continue"},
                    {"config_fingerprint", fingerprint}};
  return j.dump(2) + "\n";
}

CycleData prepare_cycle_data(std::span<const Sample> train, std::span<const Sample> heldout, const Corpus& corpus,
                             const CycleConfig& config, const OracleLabels* oracle) {
  const HashingEncoder encoder(config.encoder_dim, config.cosine);
  return prepare_cycle_data(train, heldout, corpus, FlatIndex::build(corpus, encoder), config, oracle);
}

CycleData prepare_cycle_data(std::span<const Sample> train, std::span<const Sample> heldout, const Corpus& corpus,
                             const FlatIndex& index, const CycleConfig& config, const OracleLabels* oracle) {
  config.validate();
  if (index.size() != corpus.size()) {
    throw Error(ErrorKind::dimension_mismatch, "index covers " + std::to_string(index.size()) +
                                                   " documents but the corpus has " + std::to_string(corpus.size()));
  }
  validate_dataset(train);
  validate_dataset(heldout);
  const HashingEncoder encoder(index.dimension(), config.cosine);
  CycleData data;
  data.corpus = &corpus;
  data.train = retrieve_candidates(index, encoder, train, config.k_candidate);
  data.heldout = retrieve_candidates(index, encoder, heldout, config.k_candidate);
  data.oracle = oracle;
  return data;
}

CycleState initial_state(const CycleData& data, const CycleConfig& config) {
  std::vector<std::string> vocab;
  for (const auto& s : data.train.samples) {
    vocab.insert(vocab.end(), s.answers.begin(), s.answers.end());
  }
  CycleState state;
  state.selector = SelectorModel::untrained(config.feature_dim, config.selector_channels);
  state.answerer = AnswererModel::build(vocab, config.feature_dim, config.answerer_channels);
  return state;
}

std::vector<AnswerTriple> build_answer_triples(const CycleState& state, const CycleData& data,
                                               const CycleConfig& config, SelectionMode selection) {
  std::vector<AnswerTriple> triples;
  triples.reserve(data.train.size() * config.k_train);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const Sample& s = data.train.samples[i];
    const std::string target = AnswerSet(s.answers).canonical();
    const RankedDocs picked = select_documents(selection, state.selector, s, *data.corpus, data.train.candidates[i],
                                               config.k_train, config.random_seed);
    for (const auto& e : picked.entries) {
      triples.push_back({&s, data.corpus->at(e.doc_id).text, target});
    }
  }
  return triples;
}

void run_stage1(CycleState& state, const CycleData& data, const CycleConfig& config,
                std::optional<SelectionMode> selection, std::optional<std::size_t> round) {
  const auto triples = build_answer_triples(state, data, config, selection.value_or(config.selection));
  state.metrics.triple_count = triples.size();
  state.passes.push_back(
      {"answerer", train_answerer(state.answerer, triples, pass_config(config.answerer_train, "answerer", round.value_or(state.cycle_index)))});
}

void run_stage2(CycleState& state, const CycleData& data, const CycleConfig& config,
                std::optional<std::size_t> round) {
  state.labels.clear();
  std::vector<LabeledPair> pairs;
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const Sample& s = data.train.samples[i];
    for (auto& l : pseudo_label(state.answerer, s, *data.corpus, data.train.candidates[i], config.labeling)) {
      pairs.push_back({&s, &data.corpus->at(l.doc_id), l.label});
      state.labels.push_back(std::move(l));
    }
  }
  std::size_t positives = 0;
  for (const auto& l : state.labels) {
    positives += static_cast<std::size_t>(l.label);
  }
  state.metrics.label_count = state.labels.size();
  state.metrics.label_positive_rate =
      state.labels.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(state.labels.size());
  state.passes.push_back(
      {"selector", train_selector(state.selector, pairs, pass_config(config.selector_train, "selector", round.value_or(state.cycle_index)))});
}

EvalReport evaluate_state(CycleState& state, const CycleData& data, const CycleConfig& config) {
  EvalReport report = evaluate(data.heldout, *data.corpus, state.selector, state.answerer, config.inference());
  report.config_fingerprint = fingerprint(config.canonical());
  state.metrics.cycle = state.cycle_index;
  state.metrics.accuracy = report.mean_accuracy;
  state.metrics.fingerprint = report.config_fingerprint;
  if (data.oracle != nullptr) {
    const auto q = selection_quality(report, *data.oracle);
    state.metrics.precision_at_t = q.precision_at_t;
    state.metrics.recall_at_t = q.recall_at_t;
  }
  return report;
}

void write_labels(const std::filesystem::path& path, std::span<const PseudoLabel> labels) {
  std::string out;
  for (const auto& l : labels) {
    out += ordered_json{{"sample_id", l.sample_id},
                        {"doc_id", l.doc_id},
                        {"label", l.label == 1 ? "yes" : "no"},
                        {"reason", to_string(l.reason)}}
               .dump();
    out += '\n';
  }
  binary::write_file(path, out);
}

void write_cycle_checkpoint(const std::filesystem::path& dir, const CycleState& state, const CycleConfig& config) {
  const auto cycle_dir = dir / ("cycle_" + std::to_string(state.cycle_index));
  save_checkpoint(cycle_dir / "selector.bin", state.selector.to_checkpoint());
  save_checkpoint(cycle_dir / "answerer.bin", state.answerer.to_checkpoint());
  write_labels(cycle_dir / "labels.jsonl", state.labels);
  binary::write_file(cycle_dir / "metrics.json", state.metrics.to_json(config));
}

namespace {

void finish_state(CycleState& state, const CycleData& data, const CycleConfig& config, TrainingMode mode,
                  const RunOptions& options) {
  state.metrics.training = mode;
  evaluate_state(state, data, config);
  if (options.checkpoint_dir) {
    write_cycle_checkpoint(*options.checkpoint_dir, state, config);
    for (const auto& pass : state.passes) {
      append_loss_trace(*options.checkpoint_dir / "loss_trace.jsonl", pass.module, state.cycle_index, pass.fit);
    }
  }
}

}  // namespace

std::vector<CycleState> run_cycles(const CycleData& data, const CycleConfig& config, const RunOptions& options) {
  config.validate();
  if (options.checkpoint_dir) {
    std::filesystem::remove(*options.checkpoint_dir / "loss_trace.jsonl");
  }
  std::vector<CycleState> history;
  CycleState state = initial_state(data, config);
  finish_state(state, data, config, TrainingMode::cycle, options);
  history.push_back(state);
  for (std::size_t c = 1; c <= config.n_cycles; ++c) {
    state.cycle_index = c;
    state.passes.clear();
    state.metrics = {};
    run_stage1(state, data, config);
    run_stage2(state, data, config);
    finish_state(state, data, config, TrainingMode::cycle, options);
    history.push_back(state);
  }
  return history;
}

std::vector<CycleState> run_independent_phases(const CycleData& data, const CycleConfig& config,
                                               const RunOptions& options) {
  config.validate();
  if (options.checkpoint_dir) {
    std::filesystem::remove(*options.checkpoint_dir / "loss_trace.jsonl");
  }
  std::vector<CycleState> phases;
  CycleState state = initial_state(data, config);

  // Training rounds match a cycle run's: the first two passes are cycle 1's
  // stages, the retraining pass is cycle 2's stage 1.
  state.cycle_index = 1;
  run_stage1(state, data, config, SelectionMode::dpr_order, 1);
  finish_state(state, data, config, TrainingMode::independent, options);
  phases.push_back(state);

  state.cycle_index = 2;
  state.passes.clear();
  state.metrics.triple_count = 0;
  run_stage2(state, data, config, 1);
  finish_state(state, data, config, TrainingMode::independent, options);
  phases.push_back(state);

  state.cycle_index = 3;
  state.passes.clear();
  run_stage1(state, data, config, SelectionMode::selector, 2);
  finish_state(state, data, config, TrainingMode::independent, options);
  phases.push_back(state);
  return phases;
}

CycleState run_independent(const CycleData& data, const CycleConfig& config, const RunOptions& options) {
  return run_independent_phases(data, config, options).back();
}

}  // namespace boter
