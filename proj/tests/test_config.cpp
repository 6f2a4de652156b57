#include <gtest/gtest.h>

#include "boter/error.hpp"
#include "boter/run_config.hpp"
#include "support.hpp"

namespace boter {
namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    RunConfig::from_json_text(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorKind::io;
}

TEST(RunConfig, EmptyObjectKeepsDefaults) {
  const auto c = RunConfig::from_json_text("{}");
  EXPECT_FALSE(c.seed.has_value());
  EXPECT_EQ(c.cycle.canonical(), CycleConfig{}.canonical());
  EXPECT_EQ(c.mode, TrainingMode::cycle);
}

TEST(RunConfig, ReadsEverySection) {
  const auto c = RunConfig::from_json_text(R"({
    "seed": 7,
    "retrieval": {"dim": 64, "cosine": true},
    "feature_dim": 1024,
    "cycle": {"mode": "independent", "k_candidate": 12, "k_train": 4, "k_test": 3, "n_cycles": 2,
              "selection": "random", "answering": "concat", "labeling": "pred-only"},
    "selector_train": {"learning_rate": 0.5, "epochs": 3},
    "answerer_train": {"batch_size": 2},
    "synthetic": {"n_samples": 10, "n_heldout": 5}
  })");
  EXPECT_EQ(c.seed, 7U);
  EXPECT_EQ(c.cycle.encoder_dim, 64U);
  EXPECT_TRUE(c.cycle.cosine);
  EXPECT_EQ(c.cycle.feature_dim, 1024U);
  EXPECT_EQ(c.mode, TrainingMode::independent);
  EXPECT_EQ(c.cycle.k_candidate, 12U);
  EXPECT_EQ(c.cycle.selection, SelectionMode::random);
  EXPECT_EQ(c.cycle.answering, AnswerMode::concatenating);
  EXPECT_EQ(c.cycle.labeling, LabelingMode::predictions_only);
  EXPECT_EQ(c.cycle.selector_train.learning_rate, 0.5);
  EXPECT_EQ(c.cycle.selector_train.epochs, 3U);
  EXPECT_EQ(c.cycle.answerer_train.batch_size, 2U);
  EXPECT_EQ(c.synthetic.n_heldout, 5U);
}

TEST(RunConfig, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_EQ(kind_of(R"({"sed": 1})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"cycle": {"k": 1}})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"cycle": {"k_train": "five"}})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"cycle": {"selection": "best"}})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"channels": []})"), ErrorKind::config);
  EXPECT_EQ(kind_of(R"({"seed": 1,)"), ErrorKind::parse);
}

TEST(RunConfig, RelativePathsResolveAgainstConfigDir) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  testing::write_text(dir / "sub/c.json", R"({"paths": {"dataset": "train.jsonl", "corpus": "/abs/corpus.jsonl"}})");
  const auto c = RunConfig::load(dir / "sub/c.json");
  EXPECT_EQ(*c.paths.dataset, dir / "sub/train.jsonl");
  EXPECT_EQ(*c.paths.corpus, std::filesystem::path("/abs/corpus.jsonl"));
  EXPECT_FALSE(c.paths.oracle.has_value());
  EXPECT_THROW(RunConfig::load(dir / "missing.json"), Error);
}

TEST(RunConfig, SeedPropagation) {
  auto c = RunConfig::from_json_text(R"({"seed": 5})");
  c.apply_seed(true);
  EXPECT_EQ(c.synthetic.rng_seed, 5U);
  EXPECT_NE(c.cycle.selector_train.rng_seed, c.cycle.answerer_train.rng_seed);
  auto d = RunConfig::from_json_text(R"({"seed": 5})");
  d.apply_seed(true);
  EXPECT_EQ(c.cycle.canonical(), d.cycle.canonical());

  auto none = RunConfig::from_json_text("{}");
  EXPECT_NO_THROW(none.apply_seed(false));
  try {
    none.apply_seed(true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(RunConfig, ChannelListsThenToggles) {
  const auto c = RunConfig::from_json_text(
      R"({"channels": {"selector": "question,document", "answerer": "document,extra", "context": true}})");
  EXPECT_EQ(c.cycle.selector_channels, ChannelFlags::parse("question,document,context"));
  EXPECT_EQ(c.cycle.answerer_channels, ChannelFlags::parse("document,extra,context"));
  const auto d = RunConfig::from_json_text(R"({"channels": {"query_features": false}})");
  EXPECT_FALSE(d.cycle.selector_channels.has(Channel::query_features));
  EXPECT_FALSE(d.cycle.answerer_channels.has(Channel::query_features));
  EXPECT_TRUE(d.cycle.selector_channels.has(Channel::question));
}

TEST(RunConfig, ShippedConfigLoads) {
  auto c = RunConfig::load(std::filesystem::path(BOTER_SOURCE_DIR) / "configs/synthetic.json");
  c.apply_seed(true);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.cycle.k_candidate, 30U);
  EXPECT_EQ(c.synthetic.planted_per_sample, 3U);
}

TEST(RunConfig, ValidateCatchesBadBudgets) {
  auto c = RunConfig::from_json_text(R"({"cycle": {"k_candidate": 3, "k_train": 5}})");
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace boter
