#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boter/data_model.hpp"
#include "boter/learner.hpp"
#include "boter/retrieval.hpp"

namespace boter {

inline constexpr std::string_view kSelectionPrompt =
    "Does the retrieved knowledge document provide the key information to help answer the question?";

/// Document usefulness scorer. The prompt is hashed into the extra channel
/// of every input, so changing it changes the model input.
struct SelectorModel {
  LinearScorer scorer;
  ChannelFlags channels = ChannelFlags::defaults();
  std::string prompt_text = std::string(kSelectionPrompt);

  static SelectorModel untrained(std::uint32_t dimension = kDefaultFeatureDim,
                                 ChannelFlags channels = ChannelFlags::defaults());

  std::uint32_t dimension() const { return scorer.dimension(); }
  FeatureVector features(const Sample& sample, std::string_view doc_text) const;

  ModelCheckpoint to_checkpoint() const;
  static SelectorModel from_checkpoint(ModelCheckpoint checkpoint);

  friend bool operator==(const SelectorModel&, const SelectorModel&) = default;
};

/// Probability-of-"yes" usefulness score in (0, 1).
double score_document(const SelectorModel& model, const Sample& sample, const KnowledgeDocument& doc);

/// Top-t of `retrieved` under precomputed scores (one per retrieved entry).
/// Orders by score descending, then by retrieval rank, then doc id; the
/// returned entries carry the given scores.
RankedDocs select_top_t(std::span<const double> scores, const RankedDocs& retrieved, std::size_t t);

/// Scores every retrieved document and keeps the top t. An uninformative
/// (constant) scorer reproduces the retrieval order exactly.
RankedDocs select_top_t(const SelectorModel& model, const Sample& sample, const Corpus& corpus,
                        const RankedDocs& retrieved, std::size_t t);

enum class SelectionMode { selector, dpr_order, random };

std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view name);

/// Picks t documents from `candidates` under the given strategy. dpr_order
/// keeps the retrieval prefix; random draws t without replacement using a
/// stream derived from (random_seed, sample id). Both keep retrieval scores.
RankedDocs select_documents(SelectionMode mode, const SelectorModel& model, const Sample& sample,
                            const Corpus& corpus, const RankedDocs& candidates, std::size_t t,
                            std::uint64_t random_seed);

struct LabeledPair {
  const Sample* sample = nullptr;
  const KnowledgeDocument* doc = nullptr;
  int label = 0;  // 1 = yes, 0 = no
};

/// Fits the scorer with binary negative log-likelihood, one example per
/// (sample, retrieved document) pair. Throws on an empty set.
FitResult train_selector(SelectorModel& model, std::span<const LabeledPair> labeled, const TrainConfig& config);

}  // namespace boter
