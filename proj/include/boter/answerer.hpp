#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boter/data_model.hpp"
#include "boter/learner.hpp"

namespace boter {

inline constexpr std::string_view kAnswerTemplate = "Question: {} Knowledge: {} Answer: ";

/// Closed-vocabulary answer predictor. Class c scores
/// featurize(sample, knowledge, vocab[c]) with its own linear head, so the
/// candidate text enters through the extra channel. With the extra channel on,
/// a head shared by every class also scores featurize_pair(knowledge, vocab[c]).
/// Checkpoints store the shared head after the per-class heads.
class AnswererModel {
 public:
  AnswererModel() = default;

  /// Normalizes, deduplicates and sorts `vocab`. Throws on an empty vocabulary.
  static AnswererModel build(std::span<const std::string> vocab, std::uint32_t dimension = kDefaultFeatureDim,
                             ChannelFlags channels = ChannelFlags::defaults());

  std::span<const std::string> vocab() const { return vocab_; }
  std::optional<std::size_t> class_of(std::string_view normalized_answer) const;
  std::uint32_t dimension() const { return dimension_; }
  ChannelFlags channels() const { return channels_; }
  const std::string& template_text() const { return template_; }

  SoftmaxScorer& scorer() { return scorer_; }
  const SoftmaxScorer& scorer() const { return scorer_; }
  std::span<const FeatureVector> class_features() const { return class_features_; }

  /// featurize(sample, knowledge, "") under this model's channels.
  FeatureVector base_features(const Sample& sample, std::string_view knowledge) const;
  /// Shared-head inputs, one per class; empty without a shared head.
  std::vector<FeatureVector> pair_features(std::string_view knowledge) const;
  /// Class logits for one knowledge text.
  std::vector<double> class_scores(const Sample& sample, std::string_view knowledge) const;
  /// Highest-scoring vocabulary entry; ties go to the smallest entry.
  const std::string& predict(const Sample& sample, std::string_view knowledge) const;
  /// The textual input the template describes, for dumps and inspection.
  std::string render_input(const Sample& sample, std::string_view knowledge) const;

  ModelCheckpoint to_checkpoint() const;
  static AnswererModel from_checkpoint(ModelCheckpoint checkpoint);

  friend bool operator==(const AnswererModel& a, const AnswererModel& b) {
    return a.vocab_ == b.vocab_ && a.dimension_ == b.dimension_ && a.channels_ == b.channels_ &&
           a.scorer_ == b.scorer_;
  }

 private:
  std::vector<std::string> vocab_;
  std::uint32_t dimension_ = kDefaultFeatureDim;
  ChannelFlags channels_;
  std::string template_ = std::string(kAnswerTemplate);
  SoftmaxScorer scorer_;
  std::vector<FeatureVector> class_features_;
  std::vector<std::vector<std::string>> class_tokens_;
};

std::string answer_with_document(const AnswererModel& model, const Sample& sample, const KnowledgeDocument& doc);

struct DocAnswer {
  std::string doc_id;
  std::string answer;
  double selector_score = 0.0;

  friend bool operator==(const DocAnswer&, const DocAnswer&) = default;
};

struct VoteResult {
  std::string final_answer;
  std::vector<DocAnswer> per_doc_answers;
  std::map<std::string, std::size_t> tally;
};

/// Most frequent answer. Count ties go to the larger sum of selector scores
/// among supporting documents, then to the lexicographically smallest answer.
/// Throws ErrorKind::invalid_argument("no documents to vote over") when empty.
VoteResult majority_vote(std::span<const DocAnswer> per_doc);

/// One prediction over the document texts joined in the given order.
std::string answer_concatenated(const AnswererModel& model, const Sample& sample,
                                std::span<const KnowledgeDocument> docs);

enum class AnswerMode { voting, concatenating };

std::string_view to_string(AnswerMode mode);
AnswerMode parse_answer_mode(std::string_view name);

struct AnswerTriple {
  const Sample* sample = nullptr;
  std::string knowledge;  // one selected document's text
  std::string target;     // canonical answer
};

/// Cross-entropy fit over the candidate vocabulary, one example per triple.
/// Throws ErrorKind::invalid_argument when a target is outside the vocabulary.
FitResult train_answerer(AnswererModel& model, std::span<const AnswerTriple> triples, const TrainConfig& config);

}  // namespace boter
