#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "entail/error.hpp"
#include "entail/meta_task.hpp"

namespace entail {

// L labels x M instances per mini-batch. L >= 2 keeps negatives in every
// softmax denominator, M >= 2 gives every anchor a positive.
struct BatchSpec {
  std::size_t labels_per_batch = 8;
  std::size_t instances_per_label = 4;

  std::size_t batch_size() const { return labels_per_batch * instances_per_label; }

  void validate() const {
    if (labels_per_batch < 2) throw Error("labels_per_batch must be >= 2");
    if (instances_per_label < 2) throw Error("instances_per_label must be >= 2");
  }
};

using Batch = std::vector<std::size_t>;  // indices into the pool

class BalancedBatchSampler {
 public:
  BalancedBatchSampler(const std::vector<MetaExample>& pool, BatchSpec spec,
                       bool same_dataset_only = false)
      : spec_(spec), same_dataset_(same_dataset_only) {
    spec_.validate();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& m = pool[i];
      std::string key = same_dataset_ ? m.dataset_id + '\x1f' + m.label_key : m.label_key;
      auto [it, inserted] = group_index_.try_emplace(key, groups_.size());
      if (inserted) groups_.push_back({m.dataset_id, {}});
      groups_[it->second].members.push_back(i);
    }
    check_feasible();
  }

  const BatchSpec& spec() const { return spec_; }
  std::size_t group_count() const { return groups_.size(); }

  // One pass over the pool. Every emitted batch holds exactly L groups with M
  // members each; leftovers that cannot fill a batch are dropped.
  std::vector<Batch> epoch(Rng& rng) const {
    const std::size_t L = spec_.labels_per_batch;
    const std::size_t M = spec_.instances_per_label;
    std::vector<std::vector<std::size_t>> queues;
    queues.reserve(groups_.size());
    for (const auto& g : groups_) {
      queues.push_back(g.members);
      std::shuffle(queues.back().begin(), queues.back().end(), rng);
    }
    std::vector<std::size_t> cursor(groups_.size(), 0);

    std::vector<Batch> out;
    for (;;) {
      std::vector<std::size_t> eligible;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (queues[g].size() - cursor[g] >= M) eligible.push_back(g);
      }
      if (same_dataset_) eligible = restrict_to_one_dataset(eligible, rng);
      if (eligible.size() < L) break;

      // partial Fisher-Yates: first L entries become a uniform L-subset
      for (std::size_t i = 0; i < L; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
        std::swap(eligible[i], eligible[pick(rng)]);
      }
      Batch batch;
      batch.reserve(L * M);
      for (std::size_t i = 0; i < L; ++i) {
        const auto g = eligible[i];
        for (std::size_t j = 0; j < M; ++j) batch.push_back(queues[g][cursor[g]++]);
      }
      out.push_back(std::move(batch));
    }
    return out;
  }

 private:
  struct Group {
    std::string dataset_id;
    std::vector<std::size_t> members;
  };

  std::vector<std::size_t> restrict_to_one_dataset(const std::vector<std::size_t>& eligible,
                                                   Rng& rng) const {
    std::map<std::string, std::vector<std::size_t>> by_dataset;
    for (auto g : eligible) by_dataset[groups_[g].dataset_id].push_back(g);
    std::vector<const std::vector<std::size_t>*> candidates;
    for (const auto& [id, gs] : by_dataset) {
      if (gs.size() >= spec_.labels_per_batch) candidates.push_back(&gs);
    }
    if (candidates.empty()) return {};
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return *candidates[pick(rng)];
  }

  void check_feasible() const {
    std::map<std::string, std::size_t> full_groups;  // per dataset when same_dataset_
    std::size_t total = 0;
    for (const auto& g : groups_) {
      if (g.members.size() >= spec_.instances_per_label) {
        ++total;
        ++full_groups[g.dataset_id];
      }
    }
    std::size_t best = total;
    if (same_dataset_) {
      best = 0;
      for (const auto& [id, n] : full_groups) best = std::max(best, n);
    }
    if (best < spec_.labels_per_batch) {
      throw Error("infeasible batch spec: need " + std::to_string(spec_.labels_per_batch) +
                  " labels with >= " + std::to_string(spec_.instances_per_label) +
                  " examples each" + (same_dataset_ ? " within one dataset" : "") +
                  ", but only " + std::to_string(best) + " qualify (" +
                  std::to_string(spec_.labels_per_batch - best) + " short)");
    }
  }

  BatchSpec spec_;
  bool same_dataset_;
  std::vector<Group> groups_;
  std::map<std::string, std::size_t> group_index_;
};

// Endless batch stream: reshuffles at every epoch boundary.
class BatchStream {
 public:
  BatchStream(const BalancedBatchSampler& sampler, Rng& rng) : sampler_(sampler), rng_(rng) {}

  const Batch& next() {
    while (pos_ >= current_.size()) {
      current_ = sampler_.epoch(rng_);
      pos_ = 0;
      ++epoch_;
    }
    return current_[pos_++];
  }
  std::size_t epoch() const { return epoch_; }

 private:
  const BalancedBatchSampler& sampler_;
  Rng& rng_;
  std::vector<Batch> current_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

struct SupportEntry {
  RawExample example;
  std::string premise;
  std::string hypothesis;
};

// k annotated examples per label from a target dataset's training split.
// k == 0 is the zero-shot case: no entries, labels retained.
struct SupportSet {
  std::size_t shots = 0;
  LabelSet labels;
  std::vector<SupportEntry> entries;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  bool zero_shot() const { return entries.empty(); }
};

inline SupportSet sample_support_set(const std::vector<RawExample>& train_split,
                                     const LabelSet& labels, std::size_t k, std::uint64_t seed) {
  SupportSet s;
  s.shots = k;
  s.labels = labels;
  s.seed = seed;
  if (k == 0) return s;
  Rng rng(seed);
  for (const auto& label : labels.labels()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < train_split.size(); ++i) {
      if (train_split[i].label == label) idx.push_back(i);
    }
    if (idx.size() < k) {
      s.warnings.push_back("dataset '" + labels.dataset_id() + "': label '" + label + "' has " +
                           std::to_string(idx.size()) + " training examples, " +
                           std::to_string(k) + " requested");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), k));
    for (auto i : idx) {
      const auto& ex = train_split[i];
      s.entries.push_back({ex, verbalize_premise(ex), verbalize_hypothesis(ex.label, labels)});
    }
  }
  return s;
}

}  // namespace entail
