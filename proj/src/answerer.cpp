#include "boter/answerer.hpp"

#include <algorithm>
#include <set>

#include "boter/error.hpp"
#include "boter/text.hpp"

namespace boter {

AnswererModel AnswererModel::build(std::span<const std::string> vocab, std::uint32_t dimension,
                                   ChannelFlags channels) {
  std::set<std::string> distinct;
  for (const auto& v : vocab) {
    auto n = normalize_text(v);
    if (!n.empty()) {
      distinct.insert(std::move(n));
    }
  }
  if (distinct.empty()) {
    throw Error(ErrorKind::invalid_argument, "answerer vocabulary is empty");
  }
  AnswererModel m;
  m.vocab_.assign(distinct.begin(), distinct.end());
  m.dimension_ = dimension;
  m.channels_ = channels;
  m.scorer_.heads.assign(m.vocab_.size(), LinearScorer(dimension));
  if (channels.has(Channel::extra)) {
    m.scorer_.shared = LinearScorer(dimension);
  }
  for (const auto& answer : m.vocab_) {
    m.class_features_.push_back(featurize_extra(answer, channels, dimension));
    m.class_tokens_.push_back(tokenize(answer));
  }
  return m;
}

std::optional<std::size_t> AnswererModel::class_of(std::string_view normalized_answer) const {
  auto it = std::lower_bound(vocab_.begin(), vocab_.end(), normalized_answer);
  if (it == vocab_.end() || *it != normalized_answer) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - vocab_.begin());
}

FeatureVector AnswererModel::base_features(const Sample& sample, std::string_view knowledge) const {
  return featurize(sample, knowledge, {}, channels_, dimension_);
}

std::vector<FeatureVector> AnswererModel::pair_features(std::string_view knowledge) const {
  std::vector<FeatureVector> pairs;
  if (!scorer_.has_shared()) {
    return pairs;
  }
  const auto doc = tokenize(knowledge);
  pairs.reserve(vocab_.size());
  for (const auto& tokens : class_tokens_) {
    pairs.push_back(featurize_pair(doc, tokens, channels_, dimension_));
  }
  return pairs;
}

std::vector<double> AnswererModel::class_scores(const Sample& sample, std::string_view knowledge) const {
  const FeatureVector base = base_features(sample, knowledge);
  std::vector<FeatureVector> xs;
  xs.reserve(vocab_.size());
  for (const auto& extra : class_features_) {
    xs.push_back(merged(base, extra));
  }
  return class_logits(scorer_, xs, pair_features(knowledge));
}

const std::string& AnswererModel::predict(const Sample& sample, std::string_view knowledge) const {
  const auto scores = class_scores(sample, knowledge);
  // max_element returns the first maximum; vocab is sorted.
  return vocab_[static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin())];
}

std::string AnswererModel::render_input(const Sample& sample, std::string_view knowledge) const {
  std::string out = template_;
  const auto first = out.find("{}");
  out.replace(first, 2, sample.question);
  const auto second = out.find("{}", first + sample.question.size());
  out.replace(second, 2, knowledge);
  return out;
}

ModelCheckpoint AnswererModel::to_checkpoint() const {
  ModelCheckpoint ck{dimension_, channels_, scorer_.heads, vocab_};
  if (scorer_.has_shared()) {
    ck.heads.push_back(scorer_.shared);
  }
  return ck;
}

AnswererModel AnswererModel::from_checkpoint(ModelCheckpoint checkpoint) {
  if (checkpoint.labels.empty()) {
    throw Error(ErrorKind::parse, "answerer checkpoint has no vocabulary");
  }
  AnswererModel m = build(checkpoint.labels, checkpoint.dimension, checkpoint.channels);
  if (m.vocab_ != checkpoint.labels) {
    throw Error(ErrorKind::parse, "answerer checkpoint vocabulary is not normalized and sorted");
  }
  const std::size_t expected = m.vocab_.size() + (m.scorer_.has_shared() ? 1 : 0);
  if (checkpoint.heads.size() != expected) {
    throw Error(ErrorKind::parse, "answerer checkpoint has " + std::to_string(checkpoint.heads.size()) +
                                      " heads, expected " + std::to_string(expected));
  }
  if (m.scorer_.has_shared()) {
    m.scorer_.shared = std::move(checkpoint.heads.back());
    checkpoint.heads.pop_back();
  }
  m.scorer_.heads = std::move(checkpoint.heads);
  return m;
}

std::string answer_with_document(const AnswererModel& model, const Sample& sample, const KnowledgeDocument& doc) {
  return model.predict(sample, doc.text);
}

VoteResult majority_vote(std::span<const DocAnswer> per_doc) {
  if (per_doc.empty()) {
    throw Error(ErrorKind::invalid_argument, "no documents to vote over");
  }
  VoteResult result;
  result.per_doc_answers.assign(per_doc.begin(), per_doc.end());
  std::map<std::string, double> mass;
  for (const auto& d : per_doc) {
    ++result.tally[d.answer];
    mass[d.answer] += d.selector_score;
  }
  // Tally iterates in ascending answer order, so strict comparisons keep the
  // lexicographically smallest among full ties.
  const std::string* best = nullptr;
  for (const auto& [answer, count] : result.tally) {
    if (best == nullptr) {
      best = &answer;
      continue;
    }
    const std::size_t best_count = result.tally.at(*best);
    if (count > best_count || (count == best_count && mass.at(answer) > mass.at(*best))) {
      best = &answer;
    }
  }
  result.final_answer = *best;
  return result;
}

std::string answer_concatenated(const AnswererModel& model, const Sample& sample,
                                std::span<const KnowledgeDocument> docs) {
  if (docs.empty()) {
    throw Error(ErrorKind::invalid_argument, "no documents to concatenate");
  }
  std::string knowledge;
  for (const auto& d : docs) {
    if (!knowledge.empty()) {
      knowledge += ' ';
    }
    knowledge += d.text;
  }
  return model.predict(sample, knowledge);
}

std::string_view to_string(AnswerMode mode) {
  return mode == AnswerMode::voting ? "vote" : "concat";
}

AnswerMode parse_answer_mode(std::string_view name) {
  if (name == "vote" || name == "voting") return AnswerMode::voting;
  if (name == "concat" || name == "concatenating") return AnswerMode::concatenating;
  throw Error(ErrorKind::config, "unknown answering mode '" + std::string(name) + "'");
}

FitResult train_answerer(AnswererModel& model, std::span<const AnswerTriple> triples, const TrainConfig& config) {
  if (triples.empty()) {
    throw Error(ErrorKind::invalid_argument, "train_answerer: empty training set");
  }
  std::vector<ClassExample> examples;
  examples.reserve(triples.size());
  for (const auto& t : triples) {
    const auto target = model.class_of(normalize_text(t.target));
    if (!target) {
      throw Error(ErrorKind::invalid_argument,
                  "train_answerer: target '" + t.target + "' is not in the candidate vocabulary");
    }
    examples.push_back({model.base_features(*t.sample, t.knowledge), *target,
                        model.pair_features(t.knowledge)});
  }
  auto fit = sgd_fit(model.scorer(), std::span<const ClassExample>(examples), config,
                     SoftmaxObjective{model.class_features()});
  for (auto& head : model.scorer().heads) {
    round_to_float32(head);
  }
  round_to_float32(model.scorer().shared);
  return fit;
}

}  // namespace boter
