// boter: command-line driver for ingestion, indexing, cycle training,
// evaluation, ablations and synthetic data generation.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boter/ablation.hpp"
#include "boter/binary_io.hpp"
#include "boter/bootstrap.hpp"
#include "boter/error.hpp"
#include "boter/eval.hpp"
#include "boter/retrieval.hpp"
#include "boter/run_config.hpp"
#include "boter/text.hpp"

namespace fs = std::filesystem;
using namespace boter;
using nlohmann::ordered_json;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::missing_file: return 3;
    case ErrorKind::dimension_mismatch: return 4;
    case ErrorKind::parse: return 5;
    case ErrorKind::locked: return 6;
    case ErrorKind::duplicate_id: return 7;
    case ErrorKind::io: return 8;
    case ErrorKind::invalid_argument: return 1;
  }
  return 1;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int report(std::string_view code, std::string_view message, int status) {
  std::cerr << "error code=" << code << " message=\"" << escape(message) << "\"\n";
  return status;
}

// Exclusive writer lock for an output directory, released on scope exit.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".boter.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
      throw Error(ErrorKind::io, "cannot create output directory " + dir.string() + ": " + ec.message());
    }
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST) {
        throw Error(ErrorKind::locked, "output directory is locked by " + path_.string());
      }
      throw Error(ErrorKind::io, "cannot create lock file " + path_.string());
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;
  ~OutputLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
  int fd_ = -1;
};

// Flag values start at RunConfig defaults so --help shows them; only flags
// actually given override the config file.
struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string dataset, eval_dataset, corpus, oracle, index, checkpoints;

  RunConfig defaults;
  std::string mode = "cycle";
  std::size_t k_candidate = defaults.cycle.k_candidate;
  std::size_t k_train = defaults.cycle.k_train;
  std::size_t k_test = defaults.cycle.k_test;
  std::size_t cycles = defaults.cycle.n_cycles;
  std::string selection = std::string(to_string(defaults.cycle.selection));
  std::string answering = std::string(to_string(defaults.cycle.answering));
  std::string labeling = std::string(to_string(defaults.cycle.labeling));
  std::string channels = "query-features";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "global random seed")->capture_default_str();
  cmd->add_option("--output-dir", f.output_dir, "output directory (fallback: $BOTER_OUTPUT_DIR, then .)");
}

void add_paths(CLI::App* cmd, Flags& f, bool eval_inputs) {
  cmd->add_option("--dataset", f.dataset, "training samples (JSONL)");
  if (eval_inputs) {
    cmd->add_option("--eval-dataset", f.eval_dataset, "held-out samples (JSONL)");
    cmd->add_option("--oracle", f.oracle, "planted-document labels (JSONL)");
    cmd->add_option("--checkpoints", f.checkpoints, "checkpoint directory to read");
  }
  cmd->add_option("--corpus", f.corpus, "knowledge documents (JSONL)");
  cmd->add_option("--index", f.index, "prebuilt index file");
}

void add_cycle(CLI::App* cmd, Flags& f, bool with_mode) {
  if (with_mode) {
    cmd->add_option("--mode", f.mode, "training schedule")
        ->check(CLI::IsMember({"cycle", "independent"}))
        ->capture_default_str();
  }
  cmd->add_option("--k-candidate", f.k_candidate, "documents retrieved per sample")->capture_default_str();
  cmd->add_option("--k-train", f.k_train, "documents per sample for answerer training")->capture_default_str();
  cmd->add_option("--k-test", f.k_test, "documents per sample at inference")->capture_default_str();
  cmd->add_option("--cycles", f.cycles, "number of training cycles")->capture_default_str();
  cmd->add_option("--selection", f.selection, "document selection")
      ->check(CLI::IsMember({"selector", "dpr", "random"}))
      ->capture_default_str();
  cmd->add_option("--answering", f.answering, "answer aggregation")
      ->check(CLI::IsMember({"vote", "concat"}))
      ->capture_default_str();
  cmd->add_option("--labeling", f.labeling, "pseudo-label rule")
      ->check(CLI::IsMember({"conj", "pred-only"}))
      ->capture_default_str();
  cmd->add_option("--channels", f.channels,
                  "optional feature channels to enable: comma list of query-features, context, or none")
      ->capture_default_str();
}

bool given(const CLI::App* cmd, const std::string& name) {
  try {
    return cmd->get_option(name)->count() > 0;
  } catch (const CLI::OptionNotFound&) {
    return false;
  }
}

std::optional<fs::path> flag_path(const CLI::App* cmd, const std::string& name, const std::string& value) {
  return given(cmd, name) ? std::optional<fs::path>(value) : std::nullopt;
}

RunConfig resolve(const CLI::App* cmd, const Flags& f, bool seed_required) {
  RunConfig rc = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (given(cmd, "--seed")) {
    rc.seed = f.seed;
  }
  auto override_path = [&](const std::string& name, const std::string& value, std::optional<fs::path>& slot) {
    if (auto p = flag_path(cmd, name, value)) {
      slot = *p;
    }
  };
  override_path("--dataset", f.dataset, rc.paths.dataset);
  override_path("--eval-dataset", f.eval_dataset, rc.paths.eval_dataset);
  override_path("--corpus", f.corpus, rc.paths.corpus);
  override_path("--oracle", f.oracle, rc.paths.oracle);
  override_path("--index", f.index, rc.paths.index);
  override_path("--checkpoints", f.checkpoints, rc.paths.checkpoints);
  override_path("--output-dir", f.output_dir, rc.paths.output_dir);
  if (!rc.paths.output_dir) {
    if (const char* env = std::getenv("BOTER_OUTPUT_DIR"); env != nullptr && *env != '\0') {
      rc.paths.output_dir = fs::path(env);
    } else {
      rc.paths.output_dir = fs::path(".");
    }
  }
  if (given(cmd, "--mode")) rc.mode = parse_training_mode(f.mode);
  if (given(cmd, "--k-candidate")) rc.cycle.k_candidate = f.k_candidate;
  if (given(cmd, "--k-train")) rc.cycle.k_train = f.k_train;
  if (given(cmd, "--k-test")) rc.cycle.k_test = f.k_test;
  if (given(cmd, "--cycles")) rc.cycle.n_cycles = f.cycles;
  if (given(cmd, "--selection")) rc.cycle.selection = parse_selection_mode(f.selection);
  if (given(cmd, "--answering")) rc.cycle.answering = parse_answer_mode(f.answering);
  if (given(cmd, "--labeling")) rc.cycle.labeling = parse_labeling_mode(f.labeling);
  if (given(cmd, "--channels")) {
    bool qf = false;
    bool ctx = false;
    std::stringstream list(f.channels);
    for (std::string name; std::getline(list, name, ',');) {
      if (name == "query-features") {
        qf = true;
      } else if (name == "context") {
        ctx = true;
      } else if (name != "none" && !name.empty()) {
        throw Error(ErrorKind::config, "unknown channel '" + name + "' (expected query-features, context or none)");
      }
    }
    rc.set_channel(Channel::query_features, qf);
    rc.set_channel(Channel::context, ctx);
  }
  rc.apply_seed(seed_required);
  rc.validate();
  return rc;
}

const fs::path& need(const std::optional<fs::path>& p, std::string_view what) {
  if (!p) {
    throw Error(ErrorKind::config, std::string("no ") + std::string(what) + " path configured");
  }
  if (!fs::exists(*p)) {
    throw Error(ErrorKind::missing_file, std::string(what) + " not found: " + p->string());
  }
  return *p;
}

void check_exists(const std::optional<fs::path>& p, std::string_view what) {
  if (p && !fs::exists(*p)) {
    throw Error(ErrorKind::missing_file, std::string(what) + " not found: " + p->string());
  }
}

std::optional<std::size_t> feature_dim_of(std::span<const Sample> samples) {
  for (const auto& s : samples) {
    if (s.query_features) {
      return s.query_features->size();
    }
  }
  return std::nullopt;
}

FlatIndex open_index(const RunConfig& rc, const Corpus& corpus) {
  fs::path path;
  if (rc.paths.index) {
    path = need(rc.paths.index, "index");
  } else if (fs::exists(*rc.paths.output_dir / "index.bin")) {
    path = *rc.paths.output_dir / "index.bin";
  } else {
    return FlatIndex::build(corpus, HashingEncoder(rc.cycle.encoder_dim, rc.cycle.cosine));
  }
  FlatIndex index = FlatIndex::load(path);
  if (index.dimension() != rc.cycle.encoder_dim) {
    throw Error(ErrorKind::dimension_mismatch, "index dimension " + std::to_string(index.dimension()) +
                                                   " does not match configured retrieval dim " +
                                                   std::to_string(rc.cycle.encoder_dim));
  }
  return index;
}

int cmd_synth(const RunConfig& rc) {
  const fs::path& out = *rc.paths.output_dir;
  OutputLock lock(out);
  const auto bench = generate_synthetic(rc.synthetic);
  write_dataset(out / "train.jsonl", bench.train);
  write_dataset(out / "test.jsonl", bench.heldout);
  write_corpus(out / "corpus.jsonl", bench.corpus);
  write_oracle(out / "oracle.jsonl", bench.oracle);
  std::cout << "wrote " << bench.train.size() << " train, " << bench.heldout.size() << " test samples and "
            << bench.corpus.size() << " documents to " << out.string() << "\n";
  return 0;
}

int cmd_ingest(const RunConfig& rc) {
  const auto train = ingest_dataset(need(rc.paths.dataset, "dataset"));
  std::vector<Sample> heldout;
  if (rc.paths.eval_dataset) {
    heldout = ingest_dataset(need(rc.paths.eval_dataset, "eval dataset"), feature_dim_of(train));
  }
  const Corpus corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
  std::optional<OracleLabels> oracle;
  if (rc.paths.oracle) {
    oracle = ingest_oracle(need(rc.paths.oracle, "oracle"));
  }
  const fs::path& out = *rc.paths.output_dir;
  OutputLock lock(out);
  write_dataset(out / "ingested" / "dataset.jsonl", train);
  if (!heldout.empty()) {
    write_dataset(out / "ingested" / "eval_dataset.jsonl", heldout);
  }
  write_corpus(out / "ingested" / "corpus.jsonl", corpus);
  const auto dim = feature_dim_of(train);
  ordered_json summary = {{"samples", train.size()},
                          {"eval_samples", heldout.size()},
                          {"documents", corpus.size()},
                          {"query_feature_dim", dim ? ordered_json(*dim) : ordered_json(nullptr)},
                          {"oracle_samples", oracle ? oracle->sample_count() : 0}};
  binary::write_file(out / "ingested" / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_index(const RunConfig& rc) {
  const Corpus corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
  const fs::path& out = *rc.paths.output_dir;
  OutputLock lock(out);
  const FlatIndex index = FlatIndex::build(corpus, HashingEncoder(rc.cycle.encoder_dim, rc.cycle.cosine));
  index.save(out / "index.bin");
  std::cout << "indexed " << index.size() << " documents, dim " << index.dimension() << " -> "
            << (out / "index.bin").string() << "\n";
  return 0;
}

int cmd_retrieve(const RunConfig& rc, const std::string& query, std::size_t k) {
  const Corpus corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
  const FlatIndex index = open_index(rc, corpus);
  const HashingEncoder encoder(index.dimension(), rc.cycle.cosine);
  const auto ranked = retrieve_top_k(index, encoder.encode(normalize_text(query)), k);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& e = ranked.entries[r];
    std::printf("%zu\t%s\t%.6f\t%s\n", r + 1, e.doc_id.c_str(), e.score, corpus.at(e.doc_id).text.c_str());
  }
  return 0;
}

int cmd_train(const RunConfig& rc) {
  const auto train = ingest_dataset(need(rc.paths.dataset, "dataset"));
  const auto heldout = ingest_dataset(need(rc.paths.eval_dataset, "eval dataset"), feature_dim_of(train));
  const Corpus corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
  check_exists(rc.paths.oracle, "oracle");
  std::optional<OracleLabels> oracle;
  if (rc.paths.oracle) {
    oracle = ingest_oracle(*rc.paths.oracle);
  }
  const FlatIndex index = open_index(rc, corpus);
  const fs::path& out = *rc.paths.output_dir;
  OutputLock lock(out);
  const CycleData data =
      prepare_cycle_data(train, heldout, corpus, index, rc.cycle, oracle ? &*oracle : nullptr);
  const fs::path ckpt = out / "checkpoints";
  fs::remove_all(ckpt);
  const RunOptions options{ckpt};
  const auto states = rc.mode == TrainingMode::cycle ? run_cycles(data, rc.cycle, options)
                                                       : run_independent_phases(data, rc.cycle, options);
  std::string history;
  for (const auto& s : states) {
    history += ordered_json::parse(s.metrics.to_json(rc.cycle)).dump() + "\n";
    std::cout << "cycle " << s.cycle_index << ": accuracy " << s.metrics.accuracy;
    if (s.metrics.precision_at_t) {
      std::cout << ", precision@t " << *s.metrics.precision_at_t << ", recall@t " << *s.metrics.recall_at_t;
    }
    std::cout << "\n";
  }
  binary::write_file(out / "history.jsonl", history);
  binary::write_file(out / "metrics.json", states.back().metrics.to_json(rc.cycle));
  return 0;
}

fs::path last_cycle_dir(const fs::path& ckpt) {
  if (!fs::is_directory(ckpt)) {
    throw Error(ErrorKind::missing_file, "checkpoint directory not found: " + ckpt.string());
  }
  const std::regex pattern("cycle_([0-9]+)");
  long best = -1;
  for (const auto& entry : fs::directory_iterator(ckpt)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, pattern)) {
      best = std::max(best, std::stol(m[1]));
    }
  }
  if (best < 0) {
    throw Error(ErrorKind::missing_file, "no cycle_<n> checkpoints under " + ckpt.string());
  }
  return ckpt / ("cycle_" + std::to_string(best));
}

int cmd_eval(const RunConfig& rc, std::optional<std::size_t> cycle) {
  const auto heldout = ingest_dataset(need(rc.paths.eval_dataset, "eval dataset"));
  const Corpus corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
  check_exists(rc.paths.oracle, "oracle");
  std::optional<OracleLabels> oracle;
  if (rc.paths.oracle) {
    oracle = ingest_oracle(*rc.paths.oracle);
  }
  const fs::path& out = *rc.paths.output_dir;
  const fs::path ckpt_root = rc.paths.checkpoints.value_or(out / "checkpoints");
  const fs::path dir = cycle ? ckpt_root / ("cycle_" + std::to_string(*cycle)) : last_cycle_dir(ckpt_root);
  const auto selector = SelectorModel::from_checkpoint(load_checkpoint(need(dir / "selector.bin", "selector checkpoint")));
  const auto answerer =
      AnswererModel::from_checkpoint(load_checkpoint(need(dir / "answerer.bin", "answerer checkpoint")));
  if (selector.channels != rc.cycle.selector_channels || answerer.channels() != rc.cycle.answerer_channels) {
    std::cerr << "note: using channels stored in the checkpoints\n";
  }
  const FlatIndex index = open_index(rc, corpus);
  OutputLock lock(out);
  const CandidateSet split =
      retrieve_candidates(index, HashingEncoder(index.dimension(), rc.cycle.cosine), heldout, rc.cycle.k_candidate);
  EvalReport report = evaluate(split, corpus, selector, answerer, rc.cycle.inference());
  report.config_fingerprint = fingerprint(rc.cycle.canonical());
  const fs::path eval_dir = out / "eval";
  write_predictions(eval_dir / "predictions.jsonl", report);
  write_selections(eval_dir / "selected.jsonl", report);
  ordered_json summary = {{"checkpoint", dir.filename().string()},
                          {"samples", report.per_sample.size()},
                          {"accuracy", report.mean_accuracy},
                          {"selection", to_string(rc.cycle.selection)},
                          {"answering", to_string(rc.cycle.answering)},
                          {"k_test", rc.cycle.k_test},
                          {"config_fingerprint", report.config_fingerprint}};
  if (oracle) {
    const auto q = selection_quality(report, *oracle);
    summary["precision_at_t"] = q.precision_at_t;
    summary["recall_at_t"] = q.recall_at_t;
  }
  binary::write_file(eval_dir / "report.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& rc, const std::string& preset, bool synthetic) {
  std::vector<Sample> train;
  std::vector<Sample> heldout;
  Corpus corpus;
  std::optional<OracleLabels> oracle;
  if (synthetic) {
    auto bench = generate_synthetic(rc.synthetic);
    train = std::move(bench.train);
    heldout = std::move(bench.heldout);
    corpus = std::move(bench.corpus);
    oracle = std::move(bench.oracle);
  } else {
    train = ingest_dataset(need(rc.paths.dataset, "dataset"));
    heldout = ingest_dataset(need(rc.paths.eval_dataset, "eval dataset"), feature_dim_of(train));
    corpus = ingest_corpus(need(rc.paths.corpus, "corpus"));
    if (rc.paths.oracle) {
      oracle = ingest_oracle(need(rc.paths.oracle, "oracle"));
    }
  }
  const fs::path& out = *rc.paths.output_dir;
  OutputLock lock(out);
  const auto grid = AblationGrid::preset(preset, rc.cycle);
  const auto results = run_ablation(grid, train, heldout, corpus, oracle ? &*oracle : nullptr);
  write_ablation(out / "ablation", results);
  for (const auto& r : results) {
    if (const auto* m = r.final_metrics()) {
      std::printf("%-20s accuracy %.4f\n", r.cell.label.c_str(), m->accuracy);
    } else {
      std::printf("%-20s error: %s\n", r.cell.label.c_str(), r.error->c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selector/answerer cycle training for knowledge-based question answering"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(40);

  Flags f;
  std::string query;
  std::size_t top_k = 10;
  std::size_t eval_cycle = 0;
  std::string preset = "all";
  bool synthetic = false;

  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark into the output dir");
  add_common(synth, f);

  auto* ingest = app.add_subcommand("ingest", "validate inputs and write canonical copies");
  add_common(ingest, f);
  add_paths(ingest, f, true);

  auto* index = app.add_subcommand("index", "build the flat retrieval index");
  add_common(index, f);
  add_paths(index, f, false);

  auto* retrieve = app.add_subcommand("retrieve", "print the top-k documents for a query");
  add_common(retrieve, f);
  add_paths(retrieve, f, false);
  retrieve->add_option("query", query, "query text")->required();
  retrieve->add_option("-k,--top-k", top_k, "documents to print")->capture_default_str();

  auto* train = app.add_subcommand("train", "run cycle or independent training");
  add_common(train, f);
  add_paths(train, f, true);
  add_cycle(train, f, true);

  auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints on the eval dataset");
  add_common(eval, f);
  add_paths(eval, f, true);
  add_cycle(eval, f, false);
  eval->add_option("--cycle", eval_cycle, "checkpoint cycle to load (default: latest)");

  auto* ablate = app.add_subcommand("ablate", "run an ablation preset");
  add_common(ablate, f);
  add_paths(ablate, f, true);
  add_cycle(ablate, f, false);
  ablate->add_option("--preset", preset, "selection, answering, training, labeling, k-sweep, channels or all")
      ->check(CLI::IsMember(AblationGrid::preset_names()))
      ->capture_default_str();
  ablate->add_flag("--synthetic", synthetic, "generate the synthetic benchmark instead of reading datasets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 2);
  }

  try {
    const bool seeded = train->parsed() || ablate->parsed();
    const CLI::App* cmd = app.get_subcommands().front();
    const RunConfig rc = resolve(cmd, f, seeded);
    if (synth->parsed()) return cmd_synth(rc);
    if (ingest->parsed()) return cmd_ingest(rc);
    if (index->parsed()) return cmd_index(rc);
    if (retrieve->parsed()) return cmd_retrieve(rc, query, top_k);
    if (train->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(rc, given(eval, "--cycle") ? std::optional(eval_cycle) : std::nullopt);
    if (ablate->parsed()) return cmd_ablate(rc, preset, synthetic);
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", e.what(), 1);
  }
  return 0;
}
