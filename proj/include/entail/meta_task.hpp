#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/error.hpp"
#include "entail/manifest.hpp"
#include "entail/text.hpp"

namespace entail {

using Rng = std::mt19937_64;

inline constexpr std::string_view kSentencePrefix = "sentence: ";

// Which records count as the same class for positive-pair matching.
enum class LabelKeyScope {
  kGlobal,      // hypothesis string alone: "positive" in two datasets is one class
  kPerDataset,  // (dataset_id, hypothesis)
};

struct MetaExample {
  std::string query;
  std::string premise;
  std::string hypothesis;
  std::string label_key;
  std::string dataset_id;

  friend bool operator==(const MetaExample&, const MetaExample&) = default;
};

inline std::string make_label_key(std::string_view dataset_id, std::string_view hypothesis,
                                  LabelKeyScope scope) {
  if (scope == LabelKeyScope::kGlobal) return std::string(hypothesis);
  std::string key(dataset_id);
  key += "::";
  key += hypothesis;
  return key;
}

// "(1) a (2) b, sentence: <text>" without checking the gold label. Used at
// inference, where the label is what we are predicting.
inline std::string multiple_choice_query(std::string_view text, const LabelSet& labels) {
  if (labels.empty()) throw Error("dataset '" + labels.dataset_id() + "': empty label set");
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ' ';
    out += '(';
    out += std::to_string(i + 1);
    out += ") ";
    out += labels[i];
  }
  out += ", ";
  out += kSentencePrefix;
  out += trim(text);
  return out;
}

inline std::string verbalize_query(const RawExample& example, const LabelSet& labels) {
  if (!labels.contains(example.label)) {
    throw Error("label '" + example.label + "' is not in the label set of dataset '" +
                labels.dataset_id() + "'");
  }
  return multiple_choice_query(example.text, labels);
}

inline std::string verbalize_premise(std::string_view text) {
  auto t = trim(text);
  if (t.empty()) throw Error("cannot verbalize an empty sentence");
  return std::string(kSentencePrefix) + t;
}

inline std::string verbalize_premise(const RawExample& example) {
  return verbalize_premise(example.text);
}

inline std::string verbalize_hypothesis(std::string_view label, const LabelSet& labels) {
  if (label.empty()) throw Error("empty label name");
  if (!labels.contains(label)) {
    throw Error("label '" + std::string(label) + "' is not in the label set of dataset '" +
                labels.dataset_id() + "'");
  }
  return std::string(label);
}

inline MetaExample make_meta_example(const RawExample& ex, const LabelSet& labels,
                                     LabelKeyScope scope) {
  MetaExample m;
  m.query = verbalize_query(ex, labels);
  m.premise = verbalize_premise(ex);
  m.hypothesis = verbalize_hypothesis(ex.label, labels);
  m.label_key = make_label_key(ex.dataset_id, m.hypothesis, scope);
  m.dataset_id = ex.dataset_id;
  return m;
}

struct LabelCount {
  std::string label;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct BuildReport {
  std::uint64_t seed = 0;
  std::size_t per_label_cap = 0;
  LabelKeyScope scope = LabelKeyScope::kGlobal;
  std::map<std::string, std::vector<LabelCount>> per_dataset;
  std::vector<std::string> warnings;
  // test dataset id -> true when any of its label keys occurs in pretraining
  std::map<std::string, bool> suggested_seen;
  std::size_t total = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["per_label_cap"] = per_label_cap;
    j["label_key_scope"] = scope == LabelKeyScope::kGlobal ? "global" : "per_dataset";
    j["total"] = total;
    nlohmann::json ds = nlohmann::json::object();
    for (const auto& [id, counts] : per_dataset) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& c : counts) {
        arr.push_back({{"label", c.label}, {"available", c.available}, {"selected", c.selected}});
      }
      ds[id] = std::move(arr);
    }
    j["datasets"] = std::move(ds);
    j["warnings"] = warnings;
    j["suggested_seen"] = suggested_seen;
    return j;
  }
};

struct MetaDataset {
  std::vector<MetaExample> examples;
  BuildReport report;
};

// Caps every (pretrain dataset, label) at per_label_cap examples drawn
// uniformly without replacement. Test-partition datasets are never read.
inline MetaDataset build_meta_dataset(const DatasetManifest& manifest, std::size_t per_label_cap,
                                      std::uint64_t seed, DatasetReader& reader,
                                      LabelKeyScope scope = LabelKeyScope::kGlobal) {
  if (per_label_cap < 1) throw Error("per_label_cap must be at least 1");
  MetaDataset out;
  out.report.seed = seed;
  out.report.per_label_cap = per_label_cap;
  out.report.scope = scope;
  Rng rng(seed);
  std::set<std::string> pretrain_keys;

  for (const auto* entry : manifest.partition(Partition::kPretrain)) {
    const auto raw = reader.read(entry->path, *entry);
    auto& counts = out.report.per_dataset[entry->id];
    for (const auto& label : entry->labels.labels()) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].label == label) idx.push_back(i);
      }
      LabelCount c{label, idx.size(), 0};
      if (idx.empty()) {
        out.report.warnings.push_back("dataset '" + entry->id + "': label '" + label +
                                      "' has no examples; skipped");
        counts.push_back(c);
        continue;
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(std::min(idx.size(), per_label_cap));
      std::sort(idx.begin(), idx.end());
      c.selected = idx.size();
      counts.push_back(c);
      for (auto i : idx) {
        out.examples.push_back(make_meta_example(raw[i], entry->labels, scope));
        pretrain_keys.insert(out.examples.back().label_key);
      }
    }
  }
  for (const auto* entry : manifest.partition(Partition::kTest)) {
    bool seen = false;
    for (const auto& label : entry->labels.labels()) {
      seen = seen || pretrain_keys.count(make_label_key(entry->id, label, scope)) > 0;
    }
    out.report.suggested_seen[entry->id] = seen;
  }
  out.report.total = out.examples.size();
  return out;
}

// Replaces each premise by "NULL" independently with probability `ratio`.
inline std::vector<MetaExample> nullify_premises(std::vector<MetaExample> batch, double ratio,
                                                 Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error("null ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : batch) {
    if (u(rng) < ratio) m.premise = std::string(kNullPremise);
  }
  return batch;
}

inline nlohmann::json to_json(const MetaExample& m) {
  return {{"query", m.query},
          {"premise", m.premise},
          {"hypothesis", m.hypothesis},
          {"label_key", m.label_key},
          {"dataset_id", m.dataset_id}};
}

inline MetaExample meta_from_json(const nlohmann::json& j) {
  return {j.at("query").get<std::string>(), j.at("premise").get<std::string>(),
          j.at("hypothesis").get<std::string>(), j.at("label_key").get<std::string>(),
          j.at("dataset_id").get<std::string>()};
}

inline void write_meta_file(const fs::path& file, const std::vector<MetaExample>& meta) {
  std::vector<nlohmann::json> recs;
  recs.reserve(meta.size());
  for (const auto& m : meta) recs.push_back(to_json(m));
  write_dataset_file(file, recs);
}

inline std::vector<MetaExample> read_meta_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  std::vector<MetaExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(meta_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace entail
