#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/error.hpp"
#include "entail/manifest.hpp"

// Keyword-separable synthetic corpora for desk-scale runs. Each label is a
// concept with its own keyword list; sentences mix a few concept keywords with
// shared filler words, so the label is recoverable from the bag of words.

namespace entail::synthetic {

struct Concept {
  std::string label;
  std::vector<std::string> keywords;
};

inline const std::map<std::string, std::vector<std::string>>& concepts() {
  static const std::map<std::string, std::vector<std::string>> kConcepts = {
      {"sports", {"football", "goal", "match", "team", "coach", "stadium", "league", "player",
                  "score", "tournament"}},
      {"business", {"market", "stock", "profit", "company", "revenue", "investor", "merger",
                    "shares", "economy", "trade"}},
      {"science", {"physics", "experiment", "laboratory", "molecule", "research", "theory",
                   "scientist", "quantum", "biology", "telescope"}},
      {"politics", {"election", "senate", "vote", "parliament", "minister", "campaign", "policy",
                    "government", "law", "diplomat"}},
      {"health", {"doctor", "hospital", "vaccine", "disease", "patient", "medicine", "nurse",
                  "therapy", "symptoms", "clinic"}},
      {"travel", {"flight", "hotel", "passport", "beach", "tourist", "luggage", "airport",
                  "journey", "vacation", "cruise"}},
      {"food", {"recipe", "kitchen", "delicious", "bake", "flavor", "chef", "restaurant", "spicy",
                "dessert", "ingredients"}},
      {"music", {"guitar", "concert", "album", "melody", "band", "singer", "rhythm", "piano",
                 "song", "orchestra"}},
      {"positive", {"wonderful", "excellent", "love", "amazing", "fantastic", "delightful",
                    "superb", "enjoyed", "brilliant", "pleasant"}},
      {"negative", {"terrible", "awful", "hate", "horrible", "disappointing", "worst", "boring",
                    "poor", "dreadful", "annoying"}},
      {"entailment", {"indeed", "agrees", "confirms", "consistent", "true", "certainly",
                      "supports", "matches", "exactly", "correct"}},
      {"contradiction", {"never", "denies", "false", "refutes", "contrary", "not", "opposite",
                         "wrong", "disputes", "impossible"}},
  };
  return kConcepts;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> kFiller = {
      "the",   "a",     "today", "yesterday", "people", "said",   "this",  "that",
      "new",   "report", "about", "some",     "very",   "really", "just",  "week",
      "city",  "local", "many",  "first",     "last",   "their",  "with",  "after",
      "from",  "over",  "while", "again",     "story",  "times",  "around", "group"};
  return kFiller;
}

struct DatasetSpec {
  std::string id;
  Partition partition = Partition::kPretrain;
  // label name -> concept providing its keywords
  std::vector<std::pair<std::string, std::string>> labels;
  bool pair = false;
  bool seen = false;
  std::size_t per_label = 200;        // pretrain: all; test: evaluation split
  std::size_t train_per_label = 100;  // test: support pool
};

inline std::vector<DatasetSpec> default_suite() {
  using P = Partition;
  auto same = [](std::initializer_list<const char*> names) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const char* n : names) out.emplace_back(n, n);
    return out;
  };
  return {
      {"news_a", P::kPretrain, same({"sports", "business", "science"})},
      {"news_b", P::kPretrain, same({"politics", "health", "travel"})},
      {"reviews_a", P::kPretrain, same({"positive", "negative"})},
      {"topics_c", P::kPretrain, same({"food", "music", "sports", "politics"})},
      {"topics_d", P::kPretrain, same({"science", "travel", "food", "music"})},
      {"nli_pairs", P::kPretrain, same({"entailment", "contradiction"}), true},
      {"topic4", P::kTest, same({"sports", "business", "science", "health"}), false, true, 100},
      {"sentiment2", P::kTest, same({"positive", "negative"}), false, true, 100},
      {"lifestyle3", P::kTest, same({"food", "music", "travel"}), false, true, 100},
      {"opinion2", P::kTest, {{"favorable", "positive"}, {"unfavorable", "negative"}}, false,
       false, 100},
  };
}

class SentenceGenerator {
 public:
  explicit SentenceGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string sentence(const std::string& concept_name, std::size_t n_keywords = 3,
                       std::size_t n_filler = 5) {
    const auto& kw = concepts().at(concept_name);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n_keywords; ++i) words.push_back(pick(kw));
    for (std::size_t i = 0; i < n_filler; ++i) words.push_back(pick(filler_words()));
    if (coin(0.25)) {
      // one distractor keyword from another concept
      auto it = concepts().begin();
      std::uniform_int_distribution<std::size_t> c(0, concepts().size() - 1);
      std::advance(it, static_cast<long>(c(rng_)));
      if (it->first != concept_name) words.push_back(pick(it->second));
    }
    std::shuffle(words.begin(), words.end(), rng_);
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  std::string any_topic_sentence() {
    static const std::vector<std::string> kTopics = {"sports", "business", "science", "politics",
                                                     "health", "travel",   "food",    "music"};
    return sentence(pick(kTopics), 2, 4);
  }

 private:
  const std::string& pick(const std::vector<std::string>& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng_)];
  }
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  std::mt19937_64 rng_;
};

inline std::vector<nlohmann::json> make_records(const DatasetSpec& spec, std::size_t per_label,
                                                SentenceGenerator& gen) {
  std::vector<nlohmann::json> recs;
  for (std::size_t i = 0; i < per_label; ++i) {
    for (const auto& [label, concept_name] : spec.labels) {
      nlohmann::json r;
      if (spec.pair) {
        r["text"] = gen.any_topic_sentence();
        r["text2"] = gen.sentence(concept_name, 2, 3);
      } else {
        r["text"] = gen.sentence(concept_name);
      }
      r["label"] = label;
      recs.push_back(std::move(r));
    }
  }
  return recs;
}

// Writes every dataset of `suite` plus manifest.json into `dir` and returns the
// manifest path.
inline fs::path write_suite(const fs::path& dir, std::uint64_t seed,
                            const std::vector<DatasetSpec>& suite = default_suite()) {
  fs::create_directories(dir);
  nlohmann::json datasets = nlohmann::json::array();
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& spec = suite[i];
    SentenceGenerator gen(seed * 1000003ULL + i);
    nlohmann::json e;
    e["id"] = spec.id;
    e["partition"] = to_string(spec.partition);
    std::vector<std::string> labels;
    for (const auto& l : spec.labels) labels.push_back(l.first);
    e["labels"] = labels;
    e["pair"] = spec.pair;
    if (spec.partition == Partition::kPretrain) {
      const auto recs = make_records(spec, spec.per_label, gen);
      write_dataset_file(dir / (spec.id + ".jsonl"), recs);
      e["path"] = spec.id + ".jsonl";
      e["count"] = recs.size();
    } else {
      const auto train = make_records(spec, spec.train_per_label, gen);
      const auto test = make_records(spec, spec.per_label, gen);
      write_dataset_file(dir / (spec.id + "_train.jsonl"), train);
      write_dataset_file(dir / (spec.id + "_test.jsonl"), test);
      e["path"] = spec.id + "_test.jsonl";
      e["train_path"] = spec.id + "_train.jsonl";
      e["count"] = test.size();
      e["seen"] = spec.seen;
    }
    datasets.push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + manifest.string());
  out << nlohmann::json{{"datasets", datasets}}.dump(2) << '\n';
  return manifest;
}

}  // namespace entail::synthetic
