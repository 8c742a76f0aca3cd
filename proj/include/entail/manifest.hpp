#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/error.hpp"
#include "entail/text.hpp"

namespace entail {

namespace fs = std::filesystem;

enum class Partition { kPretrain, kTest };

inline std::string to_string(Partition p) {
  return p == Partition::kPretrain ? "pretrain" : "test";
}

// Ordered label names of one dataset. The order drives the multiple-choice
// enumeration, so it is never sorted.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::string dataset_id, std::vector<std::string> labels)
      : dataset_id_(std::move(dataset_id)), labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (const auto& l : labels_) {
      if (l.empty()) throw Error("dataset '" + dataset_id_ + "': empty label name");
      if (!seen.insert(l).second) {
        throw Error("dataset '" + dataset_id_ + "': duplicate label '" + l + "'");
      }
    }
  }

  const std::string& dataset_id() const { return dataset_id_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::string& operator[](std::size_t i) const { return labels_[i]; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }
  bool contains(std::string_view label) const { return index_of(label).has_value(); }

 private:
  std::string dataset_id_;
  std::vector<std::string> labels_;
};

struct RawExample {
  std::string text;
  std::string label;
  std::string dataset_id;
};

struct DatasetEntry {
  std::string id;
  Partition partition = Partition::kPretrain;
  fs::path path;        // pretrain: all examples; test: evaluation split
  fs::path train_path;  // test only: pool for support sets
  LabelSet labels;
  bool pair = false;
  bool seen = false;  // test only: labels occurred during pretraining
  std::optional<std::size_t> count;
};

struct DatasetManifest {
  std::vector<DatasetEntry> datasets;

  std::vector<const DatasetEntry*> partition(Partition p) const {
    std::vector<const DatasetEntry*> out;
    for (const auto& d : datasets) {
      if (d.partition == p) out.push_back(&d);
    }
    return out;
  }

  const DatasetEntry& find(std::string_view id) const {
    for (const auto& d : datasets) {
      if (d.id == id) return d;
    }
    throw Error("manifest has no dataset '" + std::string(id) + "'");
  }
};

inline DatasetManifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.contains("datasets") || !j["datasets"].is_array()) {
    throw Error("manifest: missing 'datasets' array");
  }
  DatasetManifest m;
  std::set<std::string> ids;
  for (const auto& d : j["datasets"]) {
    DatasetEntry e;
    e.id = d.at("id").get<std::string>();
    if (e.id.empty()) throw Error("manifest: empty dataset id");
    const auto part = d.at("partition").get<std::string>();
    if (part == "pretrain") {
      e.partition = Partition::kPretrain;
    } else if (part == "test") {
      e.partition = Partition::kTest;
    } else {
      throw Error("manifest: dataset '" + e.id + "' has unknown partition '" + part + "'");
    }
    // One id can only live in one partition, which also rules out
    // pretrain/test overlap.
    if (!ids.insert(e.id).second) {
      throw Error("manifest: dataset id '" + e.id + "' listed more than once");
    }
    e.path = base_dir / d.at("path").get<std::string>();
    if (e.partition == Partition::kTest) {
      if (!d.contains("train_path")) {
        throw Error("manifest: test dataset '" + e.id + "' needs a train_path");
      }
      e.train_path = base_dir / d.at("train_path").get<std::string>();
      e.seen = d.value("seen", false);
    }
    e.labels = LabelSet(e.id, d.at("labels").get<std::vector<std::string>>());
    if (e.labels.empty()) throw Error("manifest: dataset '" + e.id + "' has no labels");
    e.pair = d.value("pair", false);
    if (d.contains("count")) e.count = d["count"].get<std::size_t>();
    for (const auto* p : {&e.path, &e.train_path}) {
      if (!p->empty() && !fs::exists(*p)) {
        throw Error("manifest: dataset '" + e.id + "' file not found: " + p->string());
      }
    }
    m.datasets.push_back(std::move(e));
  }
  return m;
}

inline DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("manifest " + file.string() + ": " + ex.what());
  }
  return parse_manifest(j, file.parent_path());
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m, const fs::path& base_dir) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : m.datasets) {
    nlohmann::json e;
    e["id"] = d.id;
    e["partition"] = to_string(d.partition);
    e["path"] = fs::relative(d.path, base_dir).generic_string();
    if (d.partition == Partition::kTest) {
      e["train_path"] = fs::relative(d.train_path, base_dir).generic_string();
      e["seen"] = d.seen;
    }
    e["labels"] = d.labels.labels();
    e["pair"] = d.pair;
    if (d.count) e["count"] = *d.count;
    arr.push_back(std::move(e));
  }
  return nlohmann::json{{"datasets", std::move(arr)}};
}

// Reads line-delimited dataset files and keeps a log of every path opened,
// so callers can prove which splits an evaluation touched.
class DatasetReader {
 public:
  std::vector<RawExample> read(const fs::path& file, const DatasetEntry& entry) {
    log_.push_back(file.string());
    std::ifstream in(file);
    if (!in) throw Error("cannot open dataset file " + file.string());
    std::vector<RawExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw Error(file.string() + ":" + std::to_string(lineno) + ": " + ex.what());
      }
      RawExample ex;
      ex.dataset_id = entry.id;
      ex.label = j.at("label").get<std::string>();
      if (entry.pair) {
        if (!j.contains("text2")) {
          throw Error(file.string() + ":" + std::to_string(lineno) +
                      ": pair dataset record lacks text2");
        }
        ex.text = join_pair(j.at("text").get<std::string>(), j["text2"].get<std::string>());
      } else {
        ex.text = trim(j.at("text").get<std::string>());
      }
      if (ex.text.empty()) {
        throw Error(file.string() + ":" + std::to_string(lineno) + ": empty text");
      }
      if (!entry.labels.contains(ex.label)) {
        throw Error(file.string() + ":" + std::to_string(lineno) + ": label '" + ex.label +
                    "' is not declared for dataset '" + entry.id + "'");
      }
      out.push_back(std::move(ex));
    }
    if (entry.count && file == entry.path && *entry.count != out.size()) {
      throw Error("dataset '" + entry.id + "': manifest count " + std::to_string(*entry.count) +
                  " but file has " + std::to_string(out.size()) + " records");
    }
    return out;
  }

  const std::vector<std::string>& access_log() const { return log_; }
  bool touched(const fs::path& file) const {
    return std::find(log_.begin(), log_.end(), file.string()) != log_.end();
  }

 private:
  std::vector<std::string> log_;
};

inline void write_dataset_file(const fs::path& file, const std::vector<nlohmann::json>& records) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace entail
