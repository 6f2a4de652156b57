#include "boter/selector.hpp"

#include <algorithm>
#include <numeric>

#include "boter/error.hpp"
#include "boter/rng.hpp"

namespace boter {

SelectorModel SelectorModel::untrained(std::uint32_t dimension, ChannelFlags channels) {
  SelectorModel m;
  m.scorer = LinearScorer(dimension);
  m.channels = channels;
  return m;
}

FeatureVector SelectorModel::features(const Sample& sample, std::string_view doc_text) const {
  return featurize(sample, doc_text, prompt_text, channels, dimension());
}

ModelCheckpoint SelectorModel::to_checkpoint() const {
  return ModelCheckpoint{dimension(), channels, {scorer}, {}};
}

SelectorModel SelectorModel::from_checkpoint(ModelCheckpoint checkpoint) {
  if (checkpoint.heads.size() != 1) {
    throw Error(ErrorKind::parse, "selector checkpoint must hold exactly one head");
  }
  SelectorModel m;
  m.scorer = std::move(checkpoint.heads.front());
  m.channels = checkpoint.channels;
  return m;
}

double score_document(const SelectorModel& model, const Sample& sample, const KnowledgeDocument& doc) {
  return predict_prob(model.scorer, model.features(sample, doc.text));
}

RankedDocs select_top_t(std::span<const double> scores, const RankedDocs& retrieved, std::size_t t) {
  if (scores.size() != retrieved.size()) {
    throw Error(ErrorKind::invalid_argument, "select_top_t: one score per retrieved document required");
  }
  std::vector<std::size_t> order(retrieved.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& entries = retrieved.entries;
  // Retrieval ranks are distinct, so they settle every score tie before the
  // doc id would be consulted.
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return scores[a] > scores[b];
    }
    return a < b;
  };
  t = std::min(t, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(t), order.end(), before);
  RankedDocs out;
  out.entries.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    out.entries.push_back({entries[order[i]].doc_id, scores[order[i]]});
  }
  return out;
}

RankedDocs select_top_t(const SelectorModel& model, const Sample& sample, const Corpus& corpus,
                        const RankedDocs& retrieved, std::size_t t) {
  if (t > 0 && retrieved.empty()) {
    throw Error(ErrorKind::invalid_argument, "select_top_t: no retrieved documents to select from");
  }
  std::vector<double> scores;
  scores.reserve(retrieved.size());
  for (const auto& e : retrieved.entries) {
    scores.push_back(score_document(model, sample, corpus.at(e.doc_id)));
  }
  return select_top_t(scores, retrieved, t);
}

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::selector: return "selector";
    case SelectionMode::dpr_order: return "dpr";
    case SelectionMode::random: return "random";
  }
  return "unknown";
}

SelectionMode parse_selection_mode(std::string_view name) {
  if (name == "selector") return SelectionMode::selector;
  if (name == "dpr" || name == "dpr_order") return SelectionMode::dpr_order;
  if (name == "random") return SelectionMode::random;
  throw Error(ErrorKind::config, "unknown selection mode '" + std::string(name) + "'");
}

RankedDocs select_documents(SelectionMode mode, const SelectorModel& model, const Sample& sample,
                            const Corpus& corpus, const RankedDocs& candidates, std::size_t t,
                            std::uint64_t random_seed) {
  switch (mode) {
    case SelectionMode::selector:
      return select_top_t(model, sample, corpus, candidates, t);
    case SelectionMode::dpr_order: {
      RankedDocs out;
      const std::size_t n = std::min(t, candidates.size());
      out.entries.assign(candidates.entries.begin(), candidates.entries.begin() + static_cast<std::ptrdiff_t>(n));
      return out;
    }
    case SelectionMode::random: {
      std::vector<std::size_t> order(candidates.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(random_seed, sample.id));
      rng.shuffle(std::span(order));
      RankedDocs out;
      const std::size_t n = std::min(t, candidates.size());
      for (std::size_t i = 0; i < n; ++i) {
        out.entries.push_back(candidates.entries[order[i]]);
      }
      return out;
    }
  }
  throw Error(ErrorKind::invalid_argument, "unknown selection mode");
}

FitResult train_selector(SelectorModel& model, std::span<const LabeledPair> labeled, const TrainConfig& config) {
  if (labeled.empty()) {
    throw Error(ErrorKind::invalid_argument, "train_selector: empty training set");
  }
  std::vector<BinaryExample> examples;
  examples.reserve(labeled.size());
  for (const auto& pair : labeled) {
    if (pair.label != 0 && pair.label != 1) {
      throw Error(ErrorKind::invalid_argument, "train_selector: labels must be yes (1) or no (0)");
    }
    examples.push_back({model.features(*pair.sample, pair.doc->text), pair.label});
  }
  auto fit = sgd_fit(model.scorer, std::span<const BinaryExample>(examples), config,
                     LogisticObjective{config.positive_weight});
  round_to_float32(model.scorer);
  return fit;
}

}  // namespace boter
