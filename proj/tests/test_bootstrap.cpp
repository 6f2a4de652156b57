#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "boter/bootstrap.hpp"
#include "boter/error.hpp"
#include "boter/text.hpp"
#include "support.hpp"

namespace boter {
namespace {

CycleConfig small_config(std::size_t n_cycles = 2) {
  CycleConfig c;
  c.k_candidate = 20;
  c.k_train = 5;
  c.k_test = 5;
  c.n_cycles = n_cycles;
  c.random_seed = 11;
  c.selector_channels = ChannelFlags::parse("question,document,overlap,query-features,extra");
  c.answerer_channels = ChannelFlags::parse("document,overlap,extra");
  for (TrainConfig* t : {&c.selector_train, &c.answerer_train}) {
    t->learning_rate = 0.05;
    t->warmup_steps = 50;
    t->epochs = 6;
    t->rng_seed = 11;
  }
  return c;
}

struct Fixture {
  SyntheticBenchmark bench = generate_synthetic(testing::small_spec());
  CycleConfig config = small_config();
  CycleData data = prepare_cycle_data(bench.train, bench.heldout, bench.corpus, config, &bench.oracle);
};

TEST(PseudoLabel, TruthTable) {
  // One-class vocabulary: the answerer always predicts "red".
  const auto answerer = AnswererModel::build(std::vector<std::string>{"red"}, 64);
  const Corpus corpus({{"has", "the car is red"}, {"lacks", "the car is blue"}});
  RankedDocs retrieved;
  retrieved.entries = {{"has", 1.0}, {"lacks", 0.5}};

  const Sample right = testing::make_sample("r", "color", {"red", "red", "blue"});
  const Sample wrong = testing::make_sample("w", "color", {"blue", "blue", "red"});

  const auto conj_right = pseudo_label(answerer, right, corpus, retrieved);
  EXPECT_EQ(conj_right[0].label, 1);
  EXPECT_EQ(conj_right[0].reason, LabelReason::correct_and_contains);
  EXPECT_EQ(conj_right[1].label, 1);  // "red ... blue" answers: "blue" is contained
  EXPECT_EQ(conj_right[1].reason, LabelReason::correct_and_contains);

  const Sample only_red = testing::make_sample("o", "color", {"red"});
  const auto conj = pseudo_label(answerer, only_red, corpus, retrieved);
  EXPECT_EQ(conj[0].label, 1);
  EXPECT_EQ(conj[1].label, 0);
  EXPECT_EQ(conj[1].reason, LabelReason::no_containment);

  const auto conj_wrong = pseudo_label(answerer, wrong, corpus, retrieved);
  EXPECT_EQ(conj_wrong[0].label, 0);
  EXPECT_EQ(conj_wrong[0].reason, LabelReason::wrong_answer);

  const Sample neither = testing::make_sample("n", "color", {"green"});
  const auto none = pseudo_label(answerer, neither, corpus, retrieved);
  EXPECT_EQ(none[0].label, 0);
  EXPECT_EQ(none[0].reason, LabelReason::both_failed);

  // Prediction-only labeling flips exactly the no_containment rows.
  for (const Sample* s : {&right, &only_red, &wrong, &neither}) {
    const auto a = pseudo_label(answerer, *s, corpus, retrieved, LabelingMode::predictions_and_weak);
    const auto b = pseudo_label(answerer, *s, corpus, retrieved, LabelingMode::predictions_only);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].reason, b[i].reason);
      EXPECT_EQ(a[i].doc_id, b[i].doc_id);
      EXPECT_EQ(b[i].label, a[i].label + (a[i].reason == LabelReason::no_containment ? 1 : 0));
    }
  }
}

TEST(PseudoLabel, ContainmentOnTokenBoundaries) {
  const Sample s = testing::make_sample("s", "q", {"Red Car"});
  EXPECT_TRUE(contains_any_answer(s, "A red  car, parked."));
  EXPECT_FALSE(contains_any_answer(s, "a redcar"));
  EXPECT_FALSE(contains_any_answer(s, "a red bus car"));
}

TEST(Stage1, TripleCounts) {
  Fixture f;
  const auto state = initial_state(f.data, f.config);
  for (std::size_t k : {1, 5, 20}) {
    auto c = f.config;
    c.k_train = k;
    const auto triples = build_answer_triples(state, f.data, c, SelectionMode::selector);
    EXPECT_EQ(triples.size(), f.data.train.size() * k);
    for (const auto& t : triples) {
      EXPECT_EQ(t.target, canonical_answer(t.sample->answers));
    }
  }
}

TEST(Stage1, UntrainedSelectorEqualsRetrievalOrder) {
  Fixture f;
  const auto state = initial_state(f.data, f.config);
  const auto a = build_answer_triples(state, f.data, f.config, SelectionMode::selector);
  const auto b = build_answer_triples(state, f.data, f.config, SelectionMode::dpr_order);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sample, b[i].sample);
    EXPECT_EQ(a[i].knowledge, b[i].knowledge);
  }
}

TEST(Stage2, LabelsCoverEveryCandidate) {
  Fixture f;
  auto state = initial_state(f.data, f.config);
  run_stage1(state, f.data, f.config);
  auto pred_only = state;
  run_stage2(state, f.data, f.config);
  EXPECT_EQ(state.labels.size(), f.data.train.size() * f.config.k_candidate);
  EXPECT_EQ(state.metrics.label_count, state.labels.size());
  std::set<std::string> sample_ids;
  for (const auto& s : f.data.train.samples) {
    sample_ids.insert(s.id);
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < f.data.train.size(); ++i) {
    for (const auto& e : f.data.train.candidates[i].entries) {
      seen.emplace(f.data.train.samples[i].id, e.doc_id);
    }
  }
  for (const auto& l : state.labels) {
    EXPECT_TRUE(sample_ids.contains(l.sample_id));
    EXPECT_TRUE(f.bench.corpus.find(l.doc_id).has_value());
    EXPECT_TRUE(seen.contains({l.sample_id, l.doc_id}));
    EXPECT_TRUE(l.label == 0 || l.label == 1);
  }
  auto c = f.config;
  c.labeling = LabelingMode::predictions_only;
  run_stage2(pred_only, f.data, c);
  EXPECT_GE(pred_only.metrics.label_positive_rate, state.metrics.label_positive_rate);
  ASSERT_EQ(pred_only.labels.size(), state.labels.size());
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    EXPECT_GE(pred_only.labels[i].label, state.labels[i].label);
  }
}

TEST(Stage2, PerfectAnswererLabelsPlantedDocuments) {
  Fixture f;
  auto state = initial_state(f.data, f.config);
  // Train the answerer on every planted document until it reads them.
  std::vector<AnswerTriple> triples;
  for (const auto& s : f.bench.train) {
    for (const auto& id : f.bench.oracle.positives(s.id)) {
      triples.push_back({&s, f.bench.corpus.at(id).text, canonical_answer(s.answers)});
    }
  }
  auto t = f.config.answerer_train;
  t.epochs = 15;
  train_answerer(state.answerer, triples, t);
  std::size_t planted_retrieved = 0, planted_yes = 0;
  for (std::size_t i = 0; i < f.data.train.size(); ++i) {
    const Sample& s = f.data.train.samples[i];
    const auto labels = pseudo_label(state.answerer, s, f.bench.corpus, f.data.train.candidates[i]);
    for (const auto& l : labels) {
      if (f.bench.oracle.is_positive(s.id, l.doc_id)) {
        ++planted_retrieved;
        planted_yes += static_cast<std::size_t>(l.label);
      }
    }
  }
  ASSERT_GT(planted_retrieved, 0U);
  EXPECT_GT(static_cast<double>(planted_yes) / static_cast<double>(planted_retrieved), 0.9);
}

TEST(Cycles, ZeroCyclesOnlyEvaluates) {
  Fixture f;
  auto c = f.config;
  c.n_cycles = 0;
  const auto history = run_cycles(f.data, c);
  ASSERT_EQ(history.size(), 1U);
  EXPECT_TRUE(history[0].passes.empty());
  EXPECT_EQ(history[0].metrics.cycle, 0U);
  EXPECT_TRUE(history[0].metrics.precision_at_t.has_value());
}

TEST(Cycles, SelectionImprovesAndRunsAreDeterministic) {
  Fixture f;
  const auto a = run_cycles(f.data, f.config);
  ASSERT_EQ(a.size(), 3U);
  EXPECT_GT(*a.back().metrics.precision_at_t, *a.front().metrics.precision_at_t);
  EXPECT_GT(a.back().metrics.accuracy, a.front().metrics.accuracy);
  for (std::size_t c = 1; c < a.size(); ++c) {
    ASSERT_EQ(a[c].passes.size(), 2U);
    EXPECT_EQ(a[c].passes[0].module, "answerer");
    EXPECT_EQ(a[c].passes[1].module, "selector");
  }
  const auto b = run_cycles(f.data, f.config);
  for (std::size_t c = 0; c < a.size(); ++c) {
    EXPECT_EQ(a[c].selector, b[c].selector);
    EXPECT_EQ(a[c].answerer, b[c].answerer);
    EXPECT_EQ(a[c].labels, b[c].labels);
    EXPECT_EQ(a[c].metrics.to_json(f.config), b[c].metrics.to_json(f.config));
  }
}

std::vector<TrainingPass> flatten(const std::vector<CycleState>& states) {
  std::vector<TrainingPass> out;
  for (const auto& s : states) {
    out.insert(out.end(), s.passes.begin(), s.passes.end());
  }
  return out;
}

TEST(Independent, PassesMatchCycleRunPrefix) {
  Fixture f;
  const auto phases = run_independent_phases(f.data, f.config);
  ASSERT_EQ(phases.size(), 3U);
  const auto passes = flatten(phases);
  ASSERT_EQ(passes.size(), 3U);
  EXPECT_EQ(passes[0].module, "answerer");
  EXPECT_EQ(passes[1].module, "selector");
  EXPECT_EQ(passes[2].module, "answerer");
  for (const auto& p : phases) {
    EXPECT_EQ(p.metrics.training, TrainingMode::independent);
  }

  const auto cycle_passes = flatten(run_cycles(f.data, f.config));
  ASSERT_GE(cycle_passes.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(passes[i].module, cycle_passes[i].module);
    EXPECT_EQ(passes[i].fit.epoch_loss, cycle_passes[i].fit.epoch_loss) << i;
  }
  auto one = f.config;
  one.n_cycles = 1;
  const auto short_passes = flatten(run_cycles(f.data, one));
  ASSERT_EQ(short_passes.size(), 2U);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(short_passes[i].fit.epoch_loss, cycle_passes[i].fit.epoch_loss);
  }
}

TEST(Cycles, CheckpointFiles) {
  Fixture f;
  testing::TempDir dir;
  auto c = f.config;
  c.n_cycles = 1;
  const auto history = run_cycles(f.data, c, RunOptions{dir.path()});
  for (const char* name : {"cycle_0/selector.bin", "cycle_0/answerer.bin", "cycle_1/labels.jsonl",
                           "cycle_1/metrics.json", "loss_trace.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_EQ(SelectorModel::from_checkpoint(load_checkpoint(dir / "cycle_1/selector.bin")), history[1].selector);
  EXPECT_EQ(AnswererModel::from_checkpoint(load_checkpoint(dir / "cycle_1/answerer.bin")), history[1].answerer);
  const auto labels = testing::read_text(dir / "cycle_1/labels.jsonl");
  EXPECT_EQ(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), '\n')), history[1].labels.size());
  const auto metrics = testing::read_text(dir / "cycle_1/metrics.json");
  EXPECT_NE(metrics.find("\"mode\": \"cycle\""), std::string::npos);
  EXPECT_NE(metrics.find("\"param_init\": \"continue\""), std::string::npos);
}

TEST(CycleConfig, Validation) {
  CycleConfig c;
  EXPECT_NO_THROW(c.validate());
  c.k_train = 31;
  EXPECT_THROW(c.validate(), Error);
  c = CycleConfig{};
  c.k_candidate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = CycleConfig{};
  c.k_test = 40;
  EXPECT_THROW(c.validate(), Error);
  c = CycleConfig{};
  c.answerer_train.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(CycleConfig, FingerprintTracksFields) {
  CycleConfig a;
  CycleConfig b;
  EXPECT_EQ(fingerprint(a.canonical()), fingerprint(b.canonical()));
  b.k_test = 3;
  EXPECT_NE(fingerprint(a.canonical()), fingerprint(b.canonical()));
  EXPECT_EQ(fingerprint(a.canonical()).size(), 16U);
}

TEST(Modes, Names) {
  EXPECT_EQ(parse_labeling_mode("pred-only"), LabelingMode::predictions_only);
  EXPECT_EQ(parse_training_mode("independent"), TrainingMode::independent);
  EXPECT_EQ(to_string(LabelingMode::predictions_and_weak), "conj");
  EXPECT_THROW(parse_training_mode("joint"), Error);
}

}  // namespace
}  // namespace boter
