#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <unordered_set>

#include "boter/data_model.hpp"
#include "boter/error.hpp"
#include "boter/rng.hpp"

namespace boter {
namespace {

// Word pools. They are pairwise disjoint so that each token's role in the
// generated text is unambiguous.
constexpr std::array kAnswerWords = {
    "freestyle", "surfing",  "skiing",    "tennis",   "baseball", "soccer",   "cricket",  "rugby",
    "hockey",    "golf",     "sailing",   "rowing",   "karate",   "boxing",   "fishing",  "hiking",
    "pottery",   "painting", "knitting",  "baking",   "brewing",  "farming",  "mining",   "weaving",
    "jazz",      "opera",    "ballet",    "flamenco", "tango",    "reggae",   "blues",    "salsa",
    "cheese",    "chocolate", "coffee",   "tea",      "wine",     "rice",     "wheat",    "cotton",
    "silk",      "wool",     "marble",    "granite",  "copper",   "silver",   "gold",     "oil",
    "tulips",    "roses",    "orchids",   "bamboo",   "maple",    "cedar",    "pine",     "oak",
    "penguins",  "pandas",   "koalas",    "eagles",   "dolphins", "whales",   "camels",   "horses",
};

constexpr std::array kCueWords = {"renowned", "celebrated", "notably", "famously",
                                  "chiefly",  "primarily",  "widely",  "traditionally"};

constexpr std::array kFillerWords = {
    "history", "century", "region",  "people",  "local",    "culture", "tradition", "industry",
    "early",   "modern",  "many",    "several", "since",    "during",  "became",    "often",
    "origin",  "legacy",  "various", "style",   "practice", "world",   "country",   "village",
    "annual",  "festival", "merchant", "produce", "export",   "craft",   "skill",     "heritage",
};

constexpr std::array kSceneWords = {"beach",  "street", "kitchen", "park",    "field",    "mountain",
                                    "river",  "garden", "market",  "station", "harbor",   "forest",
                                    "desert", "stadium", "office", "museum",  "bridge",   "lake",
                                    "castle", "farm"};

constexpr std::array kObjectWords = {"person", "car",    "dog",    "tree",    "bench",   "boat",   "sign",
                                     "hat",    "cup",    "table",  "chair",   "bicycle", "umbrella", "bag",
                                     "window", "door",   "lamp",   "bottle",  "flag",    "kite",   "clock",
                                     "fence",  "truck",  "bird",   "horse",   "bus",     "plate",  "shirt",
                                     "wall",   "rock"};

constexpr std::array kAdjectives = {"blurry", "bright", "dark",  "colorful", "old",   "sunny",
                                    "crowded", "quiet", "small", "large",    "misty", "snowy"};

constexpr std::array kOcrWords = {"open", "stop", "exit", "sale", "welcome", "closed", "entry", "parking"};

constexpr std::array kContextWords = {"photo", "picture", "image", "shown", "scene", "view"};

constexpr std::array kQuestionTemplates = {
    "What is the {} in this picture known for?",
    "What is this {} famous for?",
    "What is the {} shown here best known for?",
    "What would you associate with the {} in the image?",
};

constexpr std::array kConsonants = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                    "s", "t", "v", "z", "ch", "sh", "th", "dr", "gl", "tr"};
constexpr std::array kVowels = {"a", "e", "i", "o", "u"};

template <typename Pool>
std::string_view pick(Rng& rng, const Pool& pool) {
  return pool[rng.index(pool.size())];
}

std::string fill(std::string_view pattern, std::string_view value) {
  std::string out(pattern);
  out.replace(out.find("{}"), 2, value);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) {
      out += ' ';
    }
    out += w;
  }
  return out;
}

constexpr double kPlantedContextRate = 0.5;
constexpr double kConfuserShare = 0.7;
constexpr std::size_t kCuePoolSize = 200;

class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {
    auto reserve = [this](const auto& pool) {
      for (const auto& w : pool) {
        used_.insert(w);
      }
    };
    reserve(kAnswerWords);
    reserve(kCueWords);
    reserve(kFillerWords);
    reserve(kSceneWords);
    reserve(kObjectWords);
    reserve(kAdjectives);
    reserve(kOcrWords);
    reserve(kContextWords);
    for (const auto& t : kQuestionTemplates) {
      for (const auto& w : split_tokens(normalize_text(t))) {
        used_.insert(w);
      }
    }
  }

  std::string fresh(std::size_t syllables) {
    for (;;) {
      std::string w;
      for (std::size_t i = 0; i < syllables; ++i) {
        w += pick(rng_, kConsonants);
        w += pick(rng_, kVowels);
      }
      if (rng_.bernoulli(0.5)) {
        w += pick(rng_, kConsonants);
      }
      if (used_.insert(w).second) {
        return w;
      }
    }
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

struct Entity {
  std::string name;
  std::size_t answer = 0;
  std::vector<std::size_t> alternates;
  std::string adjective;
  std::string scene;
  std::vector<std::string> objects;
  std::vector<std::size_t> planted_docs;  // indices into the draft corpus
};

struct DraftDoc {
  std::string text;
};

}  // namespace

void SyntheticSpec::validate() const {
  if (n_samples == 0) {
    throw Error(ErrorKind::invalid_argument, "synthetic spec: n_samples must be positive");
  }
  if (planted_per_sample == 0) {
    throw Error(ErrorKind::invalid_argument, "synthetic spec: planted_per_sample must be at least 1");
  }
  if (samples_per_entity == 0) {
    throw Error(ErrorKind::invalid_argument, "synthetic spec: samples_per_entity must be at least 1");
  }
  if (distractor_noise_rate < 0.0 || distractor_noise_rate > 1.0) {
    throw Error(ErrorKind::invalid_argument, "synthetic spec: distractor_noise_rate must lie in [0, 1]");
  }
  if (answer_vocab_size < 4) {
    throw Error(ErrorKind::invalid_argument, "synthetic spec: answer_vocab_size must be at least 4");
  }
  const std::size_t entities = (n_samples + samples_per_entity - 1) / samples_per_entity +
                               (n_heldout + samples_per_entity - 1) / samples_per_entity;
  if (corpus_size < entities * planted_per_sample) {
    throw Error(ErrorKind::invalid_argument,
                "synthetic spec: corpus_size " + std::to_string(corpus_size) + " cannot hold " +
                    std::to_string(entities * planted_per_sample) + " planted documents");
  }
}

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.rng_seed, "synthetic"));
  WordFactory words(rng);

  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < spec.answer_vocab_size; ++i) {
    vocab.push_back(i < kAnswerWords.size() ? std::string(kAnswerWords[i]) : words.fresh(3));
  }

  const std::size_t train_entities = (spec.n_samples + spec.samples_per_entity - 1) / spec.samples_per_entity;
  const std::size_t heldout_entities = (spec.n_heldout + spec.samples_per_entity - 1) / spec.samples_per_entity;
  const std::size_t n_entities = train_entities + heldout_entities;

  // Training entities cycle through a shuffled vocabulary first so every
  // answer is a training target; held-out entities draw uniformly.
  std::vector<std::size_t> vocab_order(vocab.size());
  std::iota(vocab_order.begin(), vocab_order.end(), 0);
  rng.shuffle(std::span(vocab_order));

  std::vector<Entity> entities(n_entities);
  for (std::size_t e = 0; e < n_entities; ++e) {
    Entity& ent = entities[e];
    ent.name = words.fresh(2) + " " + words.fresh(2);
    ent.answer = e < train_entities && e < vocab.size() ? vocab_order[e] : rng.index(vocab.size());
    while (ent.alternates.size() < 2) {
      const std::size_t alt = rng.index(vocab.size());
      if (alt != ent.answer && std::find(ent.alternates.begin(), ent.alternates.end(), alt) == ent.alternates.end()) {
        ent.alternates.push_back(alt);
      }
    }
    ent.adjective = pick(rng, kAdjectives);
    ent.scene = pick(rng, kSceneWords);
    while (ent.objects.size() < 3) {
      std::string obj(pick(rng, kObjectWords));
      if (std::find(ent.objects.begin(), ent.objects.end(), obj) == ent.objects.end()) {
        ent.objects.push_back(std::move(obj));
      }
    }
  }

  // A misleading answer for one of the entity's confusers: any vocabulary
  // entry outside the entity's answer set.
  auto decoy_for = [&](const Entity& ent) {
    for (;;) {
      const std::size_t d = rng.index(vocab.size());
      if (d != ent.answer && std::find(ent.alternates.begin(), ent.alternates.end(), d) == ent.alternates.end()) {
        return d;
      }
    }
  };

  // Cue phrases draw from a pool much larger than the hand-written words, so
  // learning to recognize them takes many labeled planted documents.
  std::vector<std::string> cues(kCueWords.begin(), kCueWords.end());
  while (cues.size() < kCuePoolSize) {
    cues.push_back(words.fresh(3));
  }

  std::vector<DraftDoc> drafts;
  drafts.reserve(spec.corpus_size);
  auto fillers = [&](std::vector<std::string>& w, std::size_t lo, std::size_t hi) {
    const std::size_t n = rng.between(lo, hi);
    for (std::size_t i = 0; i < n; ++i) {
      w.emplace_back(pick(rng, kFillerWords));
    }
  };

  // Planted documents: encyclopedic text naming the entity, then a cue word
  // and the answer. A second, uncued vocabulary word follows, so reading the
  // answer means recognizing the cue. Some also mention the entity's scene or
  // an object, which spreads their retrieval rank.
  for (auto& ent : entities) {
    for (std::size_t p = 0; p < spec.planted_per_sample; ++p) {
      std::vector<std::string> w;
      fillers(w, 1, 2);
      w.push_back(ent.name);
      w.emplace_back(pick(rng, cues));
      w.push_back(vocab[ent.answer]);
      fillers(w, 1, 2);
      w.push_back(vocab[decoy_for(ent)]);
      fillers(w, 1, 2);
      if (rng.bernoulli(kPlantedContextRate)) {
        w.push_back(rng.bernoulli(0.5) ? ent.scene : ent.objects[rng.index(ent.objects.size())]);
      }
      ent.planted_docs.push_back(drafts.size());
      drafts.push_back({join(w)});
    }
  }

  // Remaining documents are distractors. Entity confusers describe what the
  // image shows, so they echo the query; background documents mix generic
  // words. A distractor carries a misleading answer string with probability
  // distractor_noise_rate: a decoy outside the entity's answers for confusers, a random
  // vocabulary word otherwise.
  const std::size_t remaining = spec.corpus_size - drafts.size();
  const auto confuser_budget = static_cast<std::size_t>(static_cast<double>(remaining) * kConfuserShare);
  for (std::size_t c = 0; c < confuser_budget; ++c) {
    const Entity& ent = entities[c % n_entities];
    std::vector<std::string> w;
    if (rng.bernoulli(0.5)) {
      w.push_back(ent.adjective);
    }
    w.emplace_back(pick(rng, kContextWords));
    w.push_back(ent.name);
    if (rng.bernoulli(0.5)) {
      w.push_back(ent.scene);
    }
    for (const auto& o : ent.objects) {
      if (rng.bernoulli(0.5)) {
        w.push_back(o);
      }
    }
    fillers(w, 1, 2);
    if (rng.bernoulli(spec.distractor_noise_rate)) {
      w.emplace_back(pick(rng, cues));
      w.push_back(vocab[decoy_for(ent)]);
    }
    drafts.push_back({join(w)});
  }
  while (drafts.size() < spec.corpus_size) {
    std::vector<std::string> w;
    w.emplace_back(pick(rng, kAdjectives));
    w.emplace_back(pick(rng, kSceneWords));
    w.emplace_back(pick(rng, kObjectWords));
    w.emplace_back(pick(rng, kObjectWords));
    w.emplace_back(pick(rng, kContextWords));
    fillers(w, 2, 3);
    if (rng.bernoulli(spec.distractor_noise_rate)) {
      w.push_back(vocab[rng.index(vocab.size())]);
    }
    rng.shuffle(std::span(w));
    drafts.push_back({join(w)});
  }

  // Shuffle corpus order before assigning ids so that document ids (which
  // break retrieval ties) carry no information about document roles.
  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<std::string> doc_id_of(drafts.size());
  std::vector<KnowledgeDocument> docs(drafts.size());
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const std::size_t draft = order[slot];
    char id[32];
    std::snprintf(id, sizeof(id), "doc%05zu", slot);
    doc_id_of[draft] = id;
    docs[slot] = {id, std::move(drafts[draft].text)};
  }

  // Category codes make query features weakly informative about the answer.
  constexpr std::size_t kCategories = 4;
  std::vector<std::vector<double>> codes(kCategories, std::vector<double>(spec.query_feature_dim));
  for (auto& code : codes) {
    for (auto& v : code) {
      v = rng.bernoulli(0.5) ? 1.0 : -1.0;
    }
  }

  SyntheticBenchmark bench;
  bench.answer_vocab = vocab;
  auto make_samples = [&](std::size_t first_entity, std::size_t count, std::string_view prefix,
                          std::vector<Sample>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      const Entity& ent = entities[first_entity + i / spec.samples_per_entity];
      Sample s;
      char id[24];
      std::snprintf(id, sizeof(id), "%s%04zu", std::string(prefix).c_str(), i);
      s.id = id;
      s.question = fill(pick(rng, kQuestionTemplates), ent.name);
      s.caption = "a " + ent.adjective + " " + std::string(pick(rng, kContextWords)) + " of a " + ent.name +
                  " near the " + ent.scene;
      std::vector<std::string> labels = ent.objects;
      rng.shuffle(std::span(labels));
      labels.resize(rng.between(2, 3));
      s.object_labels = std::move(labels);
      if (rng.bernoulli(0.3)) {
        s.ocr_strings.emplace_back(pick(rng, kOcrWords));
      }
      const std::size_t canonical_count = rng.between(6, 9);
      for (std::size_t a = 0; a < 10; ++a) {
        s.answers.push_back(a < canonical_count ? vocab[ent.answer]
                                                : vocab[ent.alternates[rng.index(ent.alternates.size())]]);
      }
      rng.shuffle(std::span(s.answers));
      if (spec.query_feature_dim > 0) {
        std::vector<double> qf(spec.query_feature_dim);
        const auto& code = codes[ent.answer % kCategories];
        for (std::size_t j = 0; j < qf.size(); ++j) {
          qf[j] = 0.5 * code[j] + rng.normal();
        }
        s.query_features = std::move(qf);
      }
      for (std::size_t p : ent.planted_docs) {
        bench.oracle.add(s.id, doc_id_of[p]);
      }
      out.push_back(std::move(s));
    }
  };
  make_samples(0, spec.n_samples, "train", bench.train);
  make_samples(train_entities, spec.n_heldout, "test", bench.heldout);

  bench.corpus = Corpus(std::move(docs));
  return bench;
}

}  // namespace boter
