#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "boter/data_model.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"

namespace boter {

inline constexpr std::uint32_t kDefaultFeatureDim = 4096;

struct FeatureEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

/// Sparse real vector of fixed dimension. Entries are kept sorted by index,
/// merged, and free of explicit zeros, so equal vectors compare equal.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::uint32_t dimension) : dimension_(dimension) {}
  /// Canonicalizes `entries`; indices must be below `dimension`.
  FeatureVector(std::uint32_t dimension, std::vector<FeatureEntry> entries);

  std::uint32_t dimension() const { return dimension_; }
  std::span<const FeatureEntry> entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }
  bool is_zero() const { return entries_.empty(); }
  double value_at(std::uint32_t index) const;
  std::vector<double> to_dense() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::uint32_t dimension_ = 0;
  std::vector<FeatureEntry> entries_;
};

/// Sum of two vectors of equal dimension.
FeatureVector merged(const FeatureVector& a, const FeatureVector& b);

enum class Channel : std::uint32_t {
  question = 1U << 0,
  document = 1U << 1,  // document unigrams and bigrams
  overlap = 1U << 2,   // tokens shared by question and document
  context = 1U << 3,   // caption, object labels, OCR strings
  query_features = 1U << 4,
  extra = 1U << 5,  // prompt or candidate-answer text
};

class ChannelFlags {
 public:
  constexpr ChannelFlags() = default;
  constexpr explicit ChannelFlags(std::uint32_t bits) : bits_(bits & kAllBits) {}

  static constexpr ChannelFlags none() { return ChannelFlags(0); }
  static constexpr ChannelFlags all() { return ChannelFlags(kAllBits); }
  /// Everything except the context channel.
  static constexpr ChannelFlags defaults() { return all().without(Channel::context); }

  constexpr bool has(Channel c) const { return (bits_ & static_cast<std::uint32_t>(c)) != 0; }
  constexpr ChannelFlags with(Channel c) const { return ChannelFlags(bits_ | static_cast<std::uint32_t>(c)); }
  constexpr ChannelFlags without(Channel c) const { return ChannelFlags(bits_ & ~static_cast<std::uint32_t>(c)); }
  constexpr ChannelFlags set(Channel c, bool on) const { return on ? with(c) : without(c); }
  constexpr std::uint32_t bits() const { return bits_; }

  /// Comma-separated channel names, e.g. "question,document,extra".
  std::string to_string() const;
  static ChannelFlags parse(std::string_view names);

  friend constexpr bool operator==(ChannelFlags, ChannelFlags) = default;

 private:
  static constexpr std::uint32_t kAllBits = (1U << 6) - 1;
  std::uint32_t bits_ = kAllBits & ~static_cast<std::uint32_t>(Channel::context);
};

/// Accumulates hashed features. A key k in channel namespace p lands in
/// bucket fnv1a64(p + k) % dimension. Token channels record presence (1.0
/// per distinct token); value channels add the given value.
class FeatureBuilder {
 public:
  explicit FeatureBuilder(std::uint32_t dimension) : dimension_(dimension) {}

  void add_tokens(std::string_view prefix, std::span<const std::string> tokens);
  void add_bigrams(std::string_view prefix, std::span<const std::string> tokens);
  void add_value(std::string_view prefix, std::string_view key, double value);

  static std::uint32_t bucket(std::string_view prefix, std::string_view key, std::uint32_t dimension) {
    return static_cast<std::uint32_t>(fnv1a64(key, fnv1a64(prefix)) % dimension);
  }

  FeatureVector build() &&;

 private:
  std::uint32_t dimension_;
  std::vector<FeatureEntry> entries_;
};

// Channel key namespaces.
inline constexpr std::string_view kQuestionPrefix = "q:";
inline constexpr std::string_view kDocumentPrefix = "d:";
inline constexpr std::string_view kBigramPrefix = "b:";
inline constexpr std::string_view kOverlapPrefix = "o:";
inline constexpr std::string_view kContextPrefix = "c:";
inline constexpr std::string_view kExtraPrefix = "x:";
inline constexpr std::string_view kQueryFeaturePrefix = "qf:";
// Overlap key carrying the number of shared tokens; '#' never survives
// normalization, so no token maps to it.
inline constexpr std::string_view kOverlapCountKey = "#shared";

/// Joint representation of (sample, document, extra text). Disabled channels
/// contribute nothing; with every channel off the result is the zero vector.
FeatureVector featurize(const Sample& sample, std::string_view doc_text, std::string_view extra_text,
                        ChannelFlags channels, std::uint32_t dimension = kDefaultFeatureDim);

// Namespace of document/candidate interaction features.
inline constexpr std::string_view kPairPrefix = "xd:";

/// Interaction features between a document and one candidate answer: whether
/// the candidate occurs in the document and the tokens around each
/// occurrence ("^" and "$" mark the text edges). Empty unless the extra
/// channel is on.
FeatureVector featurize_pair(std::span<const std::string> doc_tokens, std::span<const std::string> candidate_tokens,
                             ChannelFlags channels,
                             std::uint32_t dimension = kDefaultFeatureDim);

/// The extra-channel part of featurize on its own.
FeatureVector featurize_extra(std::string_view extra_text, ChannelFlags channels,
                              std::uint32_t dimension = kDefaultFeatureDim);

struct LinearScorer {
  std::vector<double> weights;
  double bias = 0.0;

  LinearScorer() = default;
  explicit LinearScorer(std::uint32_t dimension) : weights(dimension, 0.0) {}

  std::uint32_t dimension() const { return static_cast<std::uint32_t>(weights.size()); }
  /// w . x + b. Throws ErrorKind::dimension_mismatch.
  double logit(const FeatureVector& x) const;

  friend bool operator==(const LinearScorer&, const LinearScorer&) = default;
};

/// Softmax over per-class linear heads plus an optional head shared by all
/// classes. Class c scores heads[c] . xs[c] + shared . pairs[c]; an empty
/// shared head (dimension 0) or empty pair list drops the second term.
struct SoftmaxScorer {
  std::vector<LinearScorer> heads;
  LinearScorer shared;

  bool has_shared() const { return shared.dimension() > 0; }

  friend bool operator==(const SoftmaxScorer&, const SoftmaxScorer&) = default;
};

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// sigmoid(w . x + b).
double predict_prob(const LinearScorer& model, const FeatureVector& x);

/// Sparse parameter gradient of one linear head.
struct Gradient {
  std::vector<FeatureEntry> weights;
  double bias = 0.0;
};

/// Binary negative log-likelihood of `label` in {0, 1}, with an optional
/// weight on positive examples.
double bce_loss(const LinearScorer& model, const FeatureVector& x, int label, double positive_weight = 1.0);
/// Its gradient: weight * (p - y) * x for the weights and weight * (p - y)
/// for the bias.
Gradient grad_bce(const LinearScorer& model, const FeatureVector& x, int label, double positive_weight = 1.0);

/// Cross-entropy of `target` where class c scores heads[c] on xs[c].
double ce_loss(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs, std::size_t target);
/// One gradient per head: (p_c - [c == target]) * xs[c].
std::vector<Gradient> grad_ce(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs,
                              std::size_t target);
/// Shared-input form, every class scoring the same x.
std::vector<Gradient> grad_ce(std::span<const LinearScorer> heads, const FeatureVector& x, std::size_t target);

/// Class probabilities for per-class inputs.
std::vector<double> softmax_probs(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs);

/// Full-model forms. `pairs` is empty or holds one shared-head input per
/// class. The gradient has heads.size() + 1 entries, the last for the shared
/// head: sum_c (p_c - [c == target]) * pairs[c].
std::vector<double> class_logits(const SoftmaxScorer& model, std::span<const FeatureVector> xs,
                                 std::span<const FeatureVector> pairs);
double ce_loss(const SoftmaxScorer& model, std::span<const FeatureVector> xs, std::span<const FeatureVector> pairs,
               std::size_t target);
std::vector<Gradient> grad_ce(const SoftmaxScorer& model, std::span<const FeatureVector> xs,
                              std::span<const FeatureVector> pairs, std::size_t target);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t warmup_steps = 1000;
  double warmup_factor = 0.05;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t rng_seed = 0;
  double positive_weight = 1.0;  // binary objectives only

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Linear warmup from warmup_factor * base to base over warmup_steps, then
/// cosine annealing to zero at total_steps.
double learning_rate_at(const TrainConfig& config, std::size_t step, std::size_t total_steps);

struct FitResult {
  std::vector<double> epoch_loss;  // mean pre-update loss per epoch
  std::size_t steps = 0;
};

/// Per-head gradient contributions collected for one minibatch.
struct GradientBuffer {
  std::vector<std::pair<std::size_t, Gradient>> terms;
  void clear() { terms.clear(); }
};

void apply_gradients(LinearScorer& model, const GradientBuffer& buffer, double scale);
void apply_gradients(SoftmaxScorer& model, const GradientBuffer& buffer, double scale);

template <typename O, typename Model, typename Example>
concept SgdObjective = requires(const O& objective, const Model& model, const Example& example, GradientBuffer& buffer) {
  { objective.accumulate(model, example, buffer) } -> std::convertible_to<double>;
};

struct BinaryExample {
  FeatureVector x;
  int label = 0;
};

struct LogisticObjective {
  double positive_weight = 1.0;

  double accumulate(const LinearScorer& model, const BinaryExample& example, GradientBuffer& buffer) const {
    buffer.terms.emplace_back(0, grad_bce(model, example.x, example.label, positive_weight));
    return bce_loss(model, example.x, example.label, positive_weight);
  }
};

/// Multiclass example whose class-c input is base + class_features[c], with
/// pairs[c] feeding the shared head when present.
struct ClassExample {
  FeatureVector base;
  std::size_t target = 0;
  std::vector<FeatureVector> pairs;
};

struct SoftmaxObjective {
  std::span<const FeatureVector> class_features;

  double accumulate(const SoftmaxScorer& model, const ClassExample& example, GradientBuffer& buffer) const;
};

/// Minibatch SGD with the warmup + cosine schedule. Each epoch visits the
/// examples in an order shuffled by a generator seeded from (rng_seed,
/// epoch), so the result is a pure function of its inputs. Gradients within
/// a batch are evaluated at the pre-batch parameters and averaged.
template <typename Model, typename Example, typename Objective>
  requires SgdObjective<Objective, Model, Example>
FitResult sgd_fit(Model& model, std::span<const Example> examples, const TrainConfig& config,
                  const Objective& objective) {
  if (examples.empty()) {
    throw Error(ErrorKind::invalid_argument, "sgd_fit: no training examples");
  }
  config.validate();
  const std::size_t n = examples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;

  FitResult result;
  std::vector<std::size_t> order(n);
  GradientBuffer buffer;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.rng_seed, epoch));
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      buffer.clear();
      for (std::size_t i = start; i < end; ++i) {
        loss_sum += objective.accumulate(model, examples[order[i]], buffer);
      }
      const double rate = learning_rate_at(config, result.steps, total_steps);
      apply_gradients(model, buffer, rate / static_cast<double>(end - start));
      ++result.steps;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  return result;
}

/// Rounds parameters through float32, the checkpoint precision.
void round_to_float32(LinearScorer& model);

/// Binary checkpoint, little-endian: magic "BTCK", u32 version (1),
/// u32 dimension, u32 head count, u32 channel bits, then per head the
/// dimension float32 weights followed by the float32 bias, then u32 label
/// count and labels (u32 length + UTF-8 bytes).
struct ModelCheckpoint {
  std::uint32_t dimension = 0;
  ChannelFlags channels;
  std::vector<LinearScorer> heads;
  std::vector<std::string> labels;
};

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Appends one line-delimited record per epoch loss.
void append_loss_trace(const std::filesystem::path& path, std::string_view module, std::size_t cycle,
                       const FitResult& fit);

}  // namespace boter
