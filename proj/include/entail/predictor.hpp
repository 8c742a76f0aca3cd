#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "entail/contrastive.hpp"
#include "entail/encoder.hpp"
#include "entail/error.hpp"
#include "entail/meta_task.hpp"
#include "entail/sampler.hpp"

namespace entail {

enum class Aggregation { kMax, kMean };

struct PredictorOptions {
  Aggregation aggregation = Aggregation::kMax;
  // Feed the query with its multiple-choice label prefix, as in pretraining.
  bool multiple_choice_query = true;
};

struct CandidatePair {
  std::string premise;
  std::string hypothesis;
  std::size_t label_index = 0;
};

struct ScoredLabel {
  std::string label;
  double score = 0.0;
};

struct Prediction {
  std::string label;
  std::size_t label_index = 0;
  std::vector<ScoredLabel> ranked;  // descending score, ties by label-set order
};

// ("NULL", h) for every label when the support set is empty, otherwise one
// candidate per support entry.
inline std::vector<CandidatePair> candidate_pairs(const SupportSet& support,
                                                  const LabelSet& labels) {
  std::vector<CandidatePair> out;
  if (support.zero_shot()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out.push_back({std::string(kNullPremise), labels[i], i});
    }
    return out;
  }
  std::vector<bool> covered(labels.size(), false);
  for (const auto& e : support.entries) {
    auto idx = labels.index_of(e.hypothesis);
    if (!idx) {
      throw Error("support entry label '" + e.hypothesis + "' is not in dataset '" +
                  labels.dataset_id() + "'");
    }
    covered[*idx] = true;
    out.push_back({e.premise, e.hypothesis, *idx});
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!covered[i]) {
      throw Error("label '" + labels[i] + "' of dataset '" + labels.dataset_id() +
                  "' has no support candidates");
    }
  }
  return out;
}

// Argmax with lowest-index tie breaking, plus the full ranking.
inline Prediction select_label(const std::vector<double>& scores, const LabelSet& labels) {
  if (scores.size() != labels.size() || labels.empty()) {
    throw Error("score table does not match the label set");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Prediction p;
  p.label_index = order.front();
  p.label = labels[p.label_index];
  for (auto i : order) p.ranked.push_back({labels[i], scores[i]});
  return p;
}

// Ranks labels by query-to-(premise, hypothesis) cosine similarity. Candidate
// embeddings are cached by their encoded sequence; the cache belongs to one
// encoder state and must be cleared after the encoder is updated.
class Predictor {
 public:
  explicit Predictor(const Encoder& encoder, PredictorOptions options = {})
      : enc_(encoder), opts_(options) {}

  std::vector<double> score_table(std::string_view text, const SupportSet& support,
                                  const LabelSet& labels) const {
    const auto candidates = candidate_pairs(support, labels);
    const std::string query =
        opts_.multiple_choice_query ? multiple_choice_query(text, labels) : verbalize_premise(text);
    const Vec q = enc_.encode_query(query);

    std::vector<double> scores(labels.size(), -std::numeric_limits<double>::infinity());
    std::vector<double> sums(labels.size(), 0.0);
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& c : candidates) {
      const double s = cosine_similarity(q, candidate_embedding(c));
      scores[c.label_index] = std::max(scores[c.label_index], s);
      sums[c.label_index] += s;
      ++counts[c.label_index];
    }
    if (opts_.aggregation == Aggregation::kMean) {
      for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = sums[i] / static_cast<double>(counts[i]);
      }
    }
    return scores;
  }

  Prediction predict(std::string_view text, const SupportSet& support,
                     const LabelSet& labels) const {
    return select_label(score_table(text, support, labels), labels);
  }

  // Zero-shot ranking over all labels with NULL premises.
  std::vector<ScoredLabel> rank_labels(std::string_view text, const LabelSet& labels) const {
    SupportSet empty;
    empty.labels = labels;
    return predict(text, empty, labels).ranked;
  }

  void clear_cache() { cache_.clear(); }
  std::size_t cache_size() const { return cache_.size(); }

 private:
  const Vec& candidate_embedding(const CandidatePair& c) const {
    auto seq = enc_.premise_hypothesis_sequence(c.premise, c.hypothesis);
    auto it = cache_.find(seq);
    if (it == cache_.end()) {
      it = cache_.emplace(seq, enc_.encode(seq)).first;
    }
    return it->second;
  }

  const Encoder& enc_;
  PredictorOptions opts_;
  mutable std::unordered_map<std::string, Vec> cache_;
};

}  // namespace entail
