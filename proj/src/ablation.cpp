#include "boter/ablation.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/error.hpp"

namespace boter {

using nlohmann::ordered_json;

namespace {

template <typename T>
std::vector<T> or_base(const std::vector<T>& axis, T base) {
  return axis.empty() ? std::vector<T>{base} : axis;
}

std::string describe(const CycleConfig& c) {
  return std::string(to_string(c.selection)) + "/" + std::string(to_string(c.answering)) + "/" +
         std::string(to_string(c.labeling)) + "/k" + std::to_string(c.k_candidate) + "-" +
         std::to_string(c.k_train) + "-" + std::to_string(c.k_test) + "/" + c.answerer_channels.to_string();
}

AblationCell cell(std::string label, std::string series, double x, CycleConfig config,
                  TrainingMode training = TrainingMode::cycle) {
  return {std::move(label), std::move(series), x, std::move(config), training};
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : "";
}

}  // namespace

AblationGrid AblationGrid::cartesian(const CycleConfig& base, const AblationAxes& axes) {
  AblationGrid grid;
  const auto budgets = or_base(axes.budgets, AblationAxes::Budget{base.k_candidate, base.k_train, base.k_test});
  for (auto s : or_base(axes.selection, base.selection)) {
    for (auto a : or_base(axes.answering, base.answering)) {
      for (auto l : or_base(axes.labeling, base.labeling)) {
        for (const auto& b : budgets) {
          const std::size_t n_channels = std::max<std::size_t>(axes.channels.size(), 1);
          for (std::size_t ci = 0; ci < n_channels; ++ci) {
            CycleConfig c = base;
            c.selection = s;
            c.answering = a;
            c.labeling = l;
            c.k_candidate = b.k_candidate;
            c.k_train = b.k_train;
            c.k_test = b.k_test;
            if (!axes.channels.empty()) {
              c.selector_channels = axes.channels[ci];
              c.answerer_channels = axes.channels[ci];
            }
            grid.cells.push_back(cell(describe(c), "grid", static_cast<double>(grid.cells.size()), c));
          }
        }
      }
    }
  }
  return grid;
}

std::vector<std::string> AblationGrid::preset_names() {
  return {"selection", "answering", "training", "labeling", "k-sweep", "channels", "all"};
}

AblationGrid AblationGrid::preset(std::string_view name, const CycleConfig& base) {
  AblationGrid grid;
  auto with = [&base](auto&& edit) {
    CycleConfig c = base;
    edit(c);
    return c;
  };
  if (name == "selection") {
    grid.cells.push_back(cell("random", "selection", 0, with([](CycleConfig& c) { c.selection = SelectionMode::random; })));
    grid.cells.push_back(cell("dpr", "selection", 1, with([](CycleConfig& c) { c.selection = SelectionMode::dpr_order; })));
    grid.cells.push_back(cell("selector", "selection", 2, with([](CycleConfig& c) { c.selection = SelectionMode::selector; })));
  } else if (name == "answering") {
    grid.cells.push_back(
        cell("concat", "answering", 0, with([](CycleConfig& c) { c.answering = AnswerMode::concatenating; })));
    grid.cells.push_back(cell("vote", "answering", 1, with([](CycleConfig& c) { c.answering = AnswerMode::voting; })));
  } else if (name == "training") {
    grid.cells.push_back(cell("independent", "training", 0, base, TrainingMode::independent));
    grid.cells.push_back(cell("cycle", "training", 1, base, TrainingMode::cycle));
  } else if (name == "labeling") {
    grid.cells.push_back(cell("pred-only", "labeling", 0,
                              with([](CycleConfig& c) { c.labeling = LabelingMode::predictions_only; })));
    grid.cells.push_back(
        cell("conj", "labeling", 1, with([](CycleConfig& c) { c.labeling = LabelingMode::predictions_and_weak; })));
  } else if (name == "k-sweep") {
    for (std::size_t k : {5, 10, 30}) {
      grid.cells.push_back(cell("k_candidate=" + std::to_string(k), "k_candidate", static_cast<double>(k),
                                with([k](CycleConfig& c) {
                                  c.k_candidate = k;
                                  c.k_train = std::min(c.k_train, k);
                                  c.k_test = std::min(c.k_test, k);
                                })));
    }
  } else if (name == "channels") {
    // Both optional channels on, then each one off, then neither, starting
    // from the base channel sets of each model.
    const std::pair<std::string, std::pair<bool, bool>> variants[] = {
        {"all", {true, true}},
        {"no-query-features", {false, true}},
        {"no-context", {true, false}},
        {"neither", {false, false}},
    };
    double x = 0;
    for (const auto& [label, on] : variants) {
      const auto [qf, ctx] = on;
      grid.cells.push_back(cell(label, "channels", x++, with([qf, ctx](CycleConfig& c) {
                                  c.selector_channels =
                                      c.selector_channels.set(Channel::query_features, qf).set(Channel::context, ctx);
                                  c.answerer_channels =
                                      c.answerer_channels.set(Channel::query_features, qf).set(Channel::context, ctx);
                                })));
    }
  } else if (name == "all") {
    for (const auto& n : preset_names()) {
      if (n == "all") {
        continue;
      }
      auto part = preset(n, base);
      grid.cells.insert(grid.cells.end(), part.cells.begin(), part.cells.end());
    }
  } else {
    throw Error(ErrorKind::config, "unknown ablation preset '" + std::string(name) + "'");
  }
  return grid;
}

std::vector<AblationResult> run_ablation(const AblationGrid& grid, std::span<const Sample> train,
                                         std::span<const Sample> heldout, const Corpus& corpus,
                                         const OracleLabels* oracle) {
  std::vector<AblationResult> results;
  results.reserve(grid.cells.size());
  for (const auto& c : grid.cells) {
    AblationResult r{c, {}, std::nullopt};
    try {
      const CycleData data = prepare_cycle_data(train, heldout, corpus, c.config, oracle);
      const auto states = c.training == TrainingMode::cycle ? run_cycles(data, c.config)
                                                            : run_independent_phases(data, c.config);
      for (const auto& s : states) {
        r.history.push_back(s.metrics);
      }
    } catch (const std::exception& e) {
      r.history.clear();
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

void write_ablation(const std::filesystem::path& dir, std::span<const AblationResult> results) {
  std::string tsv =
      "label\tseries\tx\tmode\tselection\tanswering\tlabeling\tk_candidate\tk_train\tk_test\tchannels\t"
      "accuracy\tprecision_at_t\trecall_at_t\tlabel_positive_rate\terror\n";
  std::string jsonl;
  std::string by_cycle = "x\ty\tseries\n";
  std::string by_k = "x\ty\tseries\n";
  for (const auto& r : results) {
    const auto& c = r.cell.config;
    const CycleMetrics* m = r.final_metrics();
    tsv += r.cell.label + "\t" + r.cell.series + "\t" + format_number(r.cell.x) + "\t" +
           std::string(to_string(r.cell.training)) + "\t" + std::string(to_string(c.selection)) + "\t" +
           std::string(to_string(c.answering)) + "\t" + std::string(to_string(c.labeling)) + "\t" +
           std::to_string(c.k_candidate) + "\t" + std::to_string(c.k_train) + "\t" + std::to_string(c.k_test) +
           "\t" + c.answerer_channels.to_string() + "\t" + (m ? format_number(m->accuracy) : "") + "\t" +
           (m ? format_optional(m->precision_at_t) : "") + "\t" + (m ? format_optional(m->recall_at_t) : "") +
           "\t" + (m ? format_number(m->label_positive_rate) : "") + "\t" + r.error.value_or("") + "\n";

    ordered_json rec = {{"label", r.cell.label},
                        {"series", r.cell.series},
                        {"x", r.cell.x},
                        {"config", ordered_json::parse(c.canonical())},
                        {"mode", to_string(r.cell.training)}};
    ordered_json history = ordered_json::array();
    for (const auto& h : r.history) {
      history.push_back(ordered_json::parse(h.to_json(c)));
      by_cycle += std::to_string(h.cycle) + "\t" + format_number(h.accuracy) + "\t" + r.cell.label + "\n";
    }
    rec["history"] = history;
    rec["error"] = r.error ? ordered_json(*r.error) : ordered_json(nullptr);
    jsonl += rec.dump() + "\n";
    if (m && r.cell.series == "k_candidate") {
      by_k += format_number(r.cell.x) + "\t" + format_number(m->accuracy) + "\t" + r.cell.series + "\n";
    }
  }
  binary::write_file(dir / "results.tsv", tsv);
  binary::write_file(dir / "results.jsonl", jsonl);
  binary::write_file(dir / "accuracy_vs_cycle.tsv", by_cycle);
  binary::write_file(dir / "accuracy_vs_k.tsv", by_k);
}

}  // namespace boter
