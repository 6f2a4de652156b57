#include "boter/learner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "boter/binary_io.hpp"
#include "boter/text.hpp"

namespace boter {

FeatureVector::FeatureVector(std::uint32_t dimension, std::vector<FeatureEntry> entries) : dimension_(dimension) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const FeatureEntry& a, const FeatureEntry& b) { return a.index < b.index; });
  for (const auto& e : entries) {
    if (e.index >= dimension) {
      throw Error(ErrorKind::dimension_mismatch, "feature index " + std::to_string(e.index) +
                                                     " out of range for dimension " + std::to_string(dimension));
    }
    if (!entries_.empty() && entries_.back().index == e.index) {
      entries_.back().value += e.value;
    } else {
      entries_.push_back(e);
    }
  }
  std::erase_if(entries_, [](const FeatureEntry& e) { return e.value == 0.0; });
}

double FeatureVector::value_at(std::uint32_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const FeatureEntry& e, std::uint32_t i) { return e.index < i; });
  return it != entries_.end() && it->index == index ? it->value : 0.0;
}

std::vector<double> FeatureVector::to_dense() const {
  std::vector<double> out(dimension_, 0.0);
  for (const auto& e : entries_) {
    out[e.index] = e.value;
  }
  return out;
}

FeatureVector merged(const FeatureVector& a, const FeatureVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "cannot merge feature vectors of different dimension");
  }
  std::vector<FeatureEntry> entries(a.entries().begin(), a.entries().end());
  entries.insert(entries.end(), b.entries().begin(), b.entries().end());
  return FeatureVector(a.dimension(), std::move(entries));
}

namespace {

struct ChannelName {
  Channel channel;
  std::string_view name;
};

constexpr ChannelName kChannelNames[] = {
    {Channel::question, "question"},   {Channel::document, "document"},
    {Channel::overlap, "overlap"},     {Channel::context, "context"},
    {Channel::query_features, "query-features"}, {Channel::extra, "extra"},
};

}  // namespace

std::string ChannelFlags::to_string() const {
  std::string out;
  for (const auto& [channel, name] : kChannelNames) {
    if (has(channel)) {
      if (!out.empty()) {
        out += ',';
      }
      out += name;
    }
  }
  return out;
}

ChannelFlags ChannelFlags::parse(std::string_view names) {
  ChannelFlags flags = none();
  std::size_t start = 0;
  while (start <= names.size()) {
    std::size_t end = names.find(',', start);
    if (end == std::string_view::npos) {
      end = names.size();
    }
    const std::string_view name = names.substr(start, end - start);
    if (!name.empty()) {
      auto it = std::find_if(std::begin(kChannelNames), std::end(kChannelNames),
                             [&](const ChannelName& c) { return c.name == name; });
      if (it == std::end(kChannelNames)) {
        throw Error(ErrorKind::config, "unknown feature channel '" + std::string(name) + "'");
      }
      flags = flags.with(it->channel);
    }
    start = end + 1;
  }
  return flags;
}

void FeatureBuilder::add_tokens(std::string_view prefix, std::span<const std::string> tokens) {
  std::set<std::string_view> distinct(tokens.begin(), tokens.end());
  for (auto t : distinct) {
    entries_.push_back({bucket(prefix, t, dimension_), 1.0});
  }
}

void FeatureBuilder::add_bigrams(std::string_view prefix, std::span<const std::string> tokens) {
  std::set<std::string> distinct;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    distinct.insert(tokens[i] + "_" + tokens[i + 1]);
  }
  for (const auto& b : distinct) {
    entries_.push_back({bucket(prefix, b, dimension_), 1.0});
  }
}

void FeatureBuilder::add_value(std::string_view prefix, std::string_view key, double value) {
  entries_.push_back({bucket(prefix, key, dimension_), value});
}

FeatureVector FeatureBuilder::build() && { return FeatureVector(dimension_, std::move(entries_)); }

FeatureVector featurize(const Sample& sample, std::string_view doc_text, std::string_view extra_text,
                        ChannelFlags channels, std::uint32_t dimension) {
  FeatureBuilder builder(dimension);
  const bool need_question = channels.has(Channel::question) || channels.has(Channel::overlap);
  const bool need_doc = channels.has(Channel::document) || channels.has(Channel::overlap);
  const auto question = need_question ? tokenize(sample.question) : std::vector<std::string>{};
  const auto doc = need_doc ? tokenize(doc_text) : std::vector<std::string>{};

  if (channels.has(Channel::question)) {
    builder.add_tokens(kQuestionPrefix, question);
  }
  if (channels.has(Channel::document)) {
    builder.add_tokens(kDocumentPrefix, doc);
    builder.add_bigrams(kBigramPrefix, doc);
  }
  if (channels.has(Channel::overlap)) {
    std::set<std::string> q(question.begin(), question.end());
    std::vector<std::string> shared;
    for (const auto& t : std::set<std::string>(doc.begin(), doc.end())) {
      if (q.contains(t)) {
        shared.push_back(t);
      }
    }
    builder.add_tokens(kOverlapPrefix, shared);
    builder.add_value(kOverlapPrefix, kOverlapCountKey, static_cast<double>(shared.size()));
  }
  if (channels.has(Channel::context)) {
    std::vector<std::string> ctx = tokenize(sample.caption);
    for (const auto& l : sample.object_labels) {
      for (auto& t : tokenize(l)) {
        ctx.push_back(std::move(t));
      }
    }
    for (const auto& o : sample.ocr_strings) {
      for (auto& t : tokenize(o)) {
        ctx.push_back(std::move(t));
      }
    }
    builder.add_tokens(kContextPrefix, ctx);
  }
  if (channels.has(Channel::query_features) && sample.query_features) {
    const auto& qf = *sample.query_features;
    for (std::size_t j = 0; j < qf.size(); ++j) {
      builder.add_value(kQueryFeaturePrefix, std::to_string(j), qf[j]);
    }
  }
  if (channels.has(Channel::extra)) {
    builder.add_tokens(kExtraPrefix, tokenize(extra_text));
  }
  return std::move(builder).build();
}

FeatureVector featurize_pair(std::span<const std::string> doc_tokens, std::span<const std::string> candidate_tokens,
                             ChannelFlags channels,
                             std::uint32_t dimension) {
  FeatureBuilder builder(dimension);
  const std::size_t n = candidate_tokens.size();
  if (!channels.has(Channel::extra) || n == 0 || doc_tokens.size() < n) {
    return std::move(builder).build();
  }
  std::set<std::string> keys;
  for (std::size_t i = 0; i + n <= doc_tokens.size(); ++i) {
    if (!std::equal(candidate_tokens.begin(), candidate_tokens.end(), doc_tokens.begin() + i)) {
      continue;
    }
    keys.insert("in");
    keys.insert("prev:" + (i > 0 ? doc_tokens[i - 1] : std::string("^")));
    keys.insert("prev2:" + (i > 1 ? doc_tokens[i - 2] : std::string("^")));
    keys.insert("next:" + (i + n < doc_tokens.size() ? doc_tokens[i + n] : std::string("$")));
  }
  for (const auto& k : keys) {
    builder.add_value(kPairPrefix, k, 1.0);
  }
  return std::move(builder).build();
}

FeatureVector featurize_extra(std::string_view extra_text, ChannelFlags channels, std::uint32_t dimension) {
  FeatureBuilder builder(dimension);
  if (channels.has(Channel::extra)) {
    builder.add_tokens(kExtraPrefix, tokenize(extra_text));
  }
  return std::move(builder).build();
}

double LinearScorer::logit(const FeatureVector& x) const {
  if (x.dimension() != dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "feature dimension " + std::to_string(x.dimension()) +
                                                   " does not match model dimension " +
                                                   std::to_string(dimension()));
  }
  double z = bias;
  for (const auto& e : x.entries()) {
    z += weights[e.index] * e.value;
  }
  return z;
}

double predict_prob(const LinearScorer& model, const FeatureVector& x) { return sigmoid(model.logit(x)); }

namespace {

// -log sigmoid(z), computed without overflow.
double softplus_neg(double z) { return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

void check_label(int label) {
  if (label != 0 && label != 1) {
    throw Error(ErrorKind::invalid_argument, "binary label must be 0 or 1");
  }
}

}  // namespace

double bce_loss(const LinearScorer& model, const FeatureVector& x, int label, double positive_weight) {
  check_label(label);
  const double z = model.logit(x);
  return label == 1 ? positive_weight * softplus_neg(z) : softplus_neg(-z);
}

Gradient grad_bce(const LinearScorer& model, const FeatureVector& x, int label, double positive_weight) {
  check_label(label);
  const double weight = label == 1 ? positive_weight : 1.0;
  const double residual = weight * (predict_prob(model, x) - static_cast<double>(label));
  Gradient g;
  g.bias = residual;
  g.weights.reserve(x.nonzeros());
  for (const auto& e : x.entries()) {
    g.weights.push_back({e.index, residual * e.value});
  }
  return g;
}

std::vector<double> softmax_probs(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs) {
  if (heads.size() != xs.size() || heads.empty()) {
    throw Error(ErrorKind::dimension_mismatch, "softmax needs one input per head");
  }
  std::vector<double> z(heads.size());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    z[c] = heads[c].logit(xs[c]);
  }
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (auto& v : z) {
    v /= total;
  }
  return z;
}

double ce_loss(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs, std::size_t target) {
  if (target >= heads.size()) {
    throw Error(ErrorKind::invalid_argument, "target class out of range");
  }
  std::vector<double> z(heads.size());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    z[c] = heads[c].logit(xs[c]);
  }
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) {
    total += std::exp(v - m);
  }
  return m + std::log(total) - z[target];
}

std::vector<Gradient> grad_ce(std::span<const LinearScorer> heads, std::span<const FeatureVector> xs,
                              std::size_t target) {
  if (target >= heads.size()) {
    throw Error(ErrorKind::invalid_argument, "target class out of range");
  }
  const auto p = softmax_probs(heads, xs);
  std::vector<Gradient> grads(heads.size());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    const double residual = p[c] - (c == target ? 1.0 : 0.0);
    grads[c].bias = residual;
    grads[c].weights.reserve(xs[c].nonzeros());
    for (const auto& e : xs[c].entries()) {
      grads[c].weights.push_back({e.index, residual * e.value});
    }
  }
  return grads;
}

std::vector<Gradient> grad_ce(std::span<const LinearScorer> heads, const FeatureVector& x, std::size_t target) {
  const std::vector<FeatureVector> xs(heads.size(), x);
  return grad_ce(heads, xs, target);
}

std::vector<double> class_logits(const SoftmaxScorer& model, std::span<const FeatureVector> xs,
                                 std::span<const FeatureVector> pairs) {
  if (model.heads.size() != xs.size() || model.heads.empty()) {
    throw Error(ErrorKind::dimension_mismatch, "softmax needs one input per head");
  }
  const bool use_pairs = model.has_shared() && !pairs.empty();
  if (use_pairs && pairs.size() != xs.size()) {
    throw Error(ErrorKind::dimension_mismatch, "softmax needs one shared-head input per class");
  }
  std::vector<double> z(xs.size());
  for (std::size_t c = 0; c < xs.size(); ++c) {
    z[c] = model.heads[c].logit(xs[c]) + (use_pairs ? model.shared.logit(pairs[c]) : 0.0);
  }
  return z;
}

namespace {

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) {
    total += std::exp(v - m);
  }
  return m + std::log(total);
}

}  // namespace

double ce_loss(const SoftmaxScorer& model, std::span<const FeatureVector> xs, std::span<const FeatureVector> pairs,
               std::size_t target) {
  if (target >= model.heads.size()) {
    throw Error(ErrorKind::invalid_argument, "target class out of range");
  }
  const auto z = class_logits(model, xs, pairs);
  return log_sum_exp(z) - z[target];
}

std::vector<Gradient> grad_ce(const SoftmaxScorer& model, std::span<const FeatureVector> xs,
                              std::span<const FeatureVector> pairs, std::size_t target) {
  if (target >= model.heads.size()) {
    throw Error(ErrorKind::invalid_argument, "target class out of range");
  }
  const auto z = class_logits(model, xs, pairs);
  const double lse = log_sum_exp(z);
  const bool use_pairs = model.has_shared() && !pairs.empty();
  std::vector<Gradient> grads(xs.size() + 1);
  Gradient& shared = grads.back();
  for (std::size_t c = 0; c < xs.size(); ++c) {
    const double residual = std::exp(z[c] - lse) - (c == target ? 1.0 : 0.0);
    grads[c].bias = residual;
    grads[c].weights.reserve(xs[c].nonzeros());
    for (const auto& e : xs[c].entries()) {
      grads[c].weights.push_back({e.index, residual * e.value});
    }
    if (use_pairs) {
      shared.bias += residual;
      for (const auto& e : pairs[c].entries()) {
        shared.weights.push_back({e.index, residual * e.value});
      }
    }
  }
  return grads;
}

double SoftmaxObjective::accumulate(const SoftmaxScorer& model, const ClassExample& example,
                                    GradientBuffer& buffer) const {
  std::vector<FeatureVector> xs;
  xs.reserve(model.heads.size());
  for (std::size_t c = 0; c < model.heads.size(); ++c) {
    xs.push_back(class_features.empty() ? example.base : merged(example.base, class_features[c]));
  }
  auto grads = grad_ce(model, xs, example.pairs, example.target);
  const double loss = ce_loss(model, xs, example.pairs, example.target);
  const std::size_t shared = model.heads.size();
  for (std::size_t c = 0; c < grads.size(); ++c) {
    if (c == shared && grads[c].weights.empty()) {
      continue;
    }
    buffer.terms.emplace_back(c, std::move(grads[c]));
  }
  return loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::config, "learning_rate must be finite and nonnegative");
  }
  if (batch_size == 0) {
    throw Error(ErrorKind::config, "batch_size must be positive");
  }
  if (!(warmup_factor >= 0.0 && warmup_factor <= 1.0)) {
    throw Error(ErrorKind::config, "warmup_factor must lie in [0, 1]");
  }
  if (!(positive_weight > 0.0) || !std::isfinite(positive_weight)) {
    throw Error(ErrorKind::config, "positive_weight must be positive");
  }
}

double learning_rate_at(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  const double base = config.learning_rate;
  if (step < config.warmup_steps) {
    const double progress = static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    return base * (config.warmup_factor + (1.0 - config.warmup_factor) * progress);
  }
  if (total_steps <= config.warmup_steps) {
    return base;
  }
  const double progress = std::min(1.0, static_cast<double>(step - config.warmup_steps) /
                                            static_cast<double>(total_steps - config.warmup_steps));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

void apply_to(LinearScorer& head, const Gradient& g, double scale) {
  for (const auto& e : g.weights) {
    head.weights[e.index] -= scale * e.value;
  }
  head.bias -= scale * g.bias;
}

}  // namespace

void apply_gradients(LinearScorer& model, const GradientBuffer& buffer, double scale) {
  for (const auto& [head, g] : buffer.terms) {
    if (head != 0) {
      throw Error(ErrorKind::invalid_argument, "single-head model received a multi-head gradient");
    }
    apply_to(model, g, scale);
  }
}

void apply_gradients(SoftmaxScorer& model, const GradientBuffer& buffer, double scale) {
  for (const auto& [head, g] : buffer.terms) {
    if (head == model.heads.size() && model.has_shared()) {
      apply_to(model.shared, g, scale);
    } else {
      apply_to(model.heads.at(head), g, scale);
    }
  }
}

void round_to_float32(LinearScorer& model) {
  for (auto& w : model.weights) {
    w = static_cast<double>(static_cast<float>(w));
  }
  model.bias = static_cast<double>(static_cast<float>(model.bias));
}

namespace {
constexpr std::string_view kCheckpointMagic = "BTCK";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint) {
  std::string out;
  out.append(kCheckpointMagic);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_u32(out, checkpoint.dimension);
  binary::put_u32(out, static_cast<std::uint32_t>(checkpoint.heads.size()));
  binary::put_u32(out, checkpoint.channels.bits());
  for (const auto& head : checkpoint.heads) {
    if (head.dimension() != checkpoint.dimension) {
      throw Error(ErrorKind::dimension_mismatch, "checkpoint head dimension mismatch");
    }
    for (double w : head.weights) {
      binary::put_f32(out, static_cast<float>(w));
    }
    binary::put_f32(out, static_cast<float>(head.bias));
  }
  binary::put_u32(out, static_cast<std::uint32_t>(checkpoint.labels.size()));
  for (const auto& label : checkpoint.labels) {
    binary::put_string(out, label);
  }
  binary::write_file(path, out);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  binary::Reader in(binary::read_file(path), path.string());
  if (in.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorKind::parse, path.string() + ": not a checkpoint file");
  }
  if (const auto version = in.u32(); version != kCheckpointVersion) {
    throw Error(ErrorKind::parse, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelCheckpoint ck;
  ck.dimension = in.u32();
  const std::uint32_t heads = in.u32();
  ck.channels = ChannelFlags(in.u32());
  ck.heads.reserve(heads);
  for (std::uint32_t h = 0; h < heads; ++h) {
    LinearScorer head(ck.dimension);
    for (auto& w : head.weights) {
      w = in.f32();
    }
    head.bias = in.f32();
    ck.heads.push_back(std::move(head));
  }
  const std::uint32_t labels = in.u32();
  for (std::uint32_t i = 0; i < labels; ++i) {
    ck.labels.push_back(in.string());
  }
  if (!in.at_end()) {
    throw Error(ErrorKind::parse, path.string() + ": trailing bytes in checkpoint");
  }
  return ck;
}

void append_loss_trace(const std::filesystem::path& path, std::string_view module, std::size_t cycle,
                       const FitResult& fit) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw Error(ErrorKind::io, "cannot append to " + path.string());
  }
  for (std::size_t epoch = 0; epoch < fit.epoch_loss.size(); ++epoch) {
    out << nlohmann::json{{"module", module}, {"cycle", cycle}, {"epoch", epoch}, {"loss", fit.epoch_loss[epoch]}}
               .dump()
        << '\n';
  }
}

}  // namespace boter
