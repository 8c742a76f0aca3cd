#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "entail/contrastive.hpp"
#include "entail/encoder.hpp"
#include "entail/error.hpp"
#include "entail/meta_task.hpp"
#include "entail/predictor.hpp"
#include "entail/sampler.hpp"
#include "entail/text.hpp"

namespace entail {

struct TrainConfig {
  double learning_rate = 1e-5;
  double warmup_ratio = 0.06;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::size_t epochs_pretrain = 20;
  std::size_t epochs_finetune = 10;
  double null_ratio = 0.05;
  BatchSpec batch_spec;
  bool same_dataset_only = false;
  std::uint64_t seed = 13;
  SCLParams scl;

  // data preparation
  std::size_t per_label_cap = 128;
  LabelKeyScope label_key_scope = LabelKeyScope::kGlobal;

  // toy encoder
  ToyEncoderShape shape;

  // inference
  PredictorOptions predictor;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw Error("learning_rate must be non-negative");
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw Error("warmup_ratio must be in [0, 1)");
    if (!(null_ratio >= 0.0 && null_ratio <= 1.0)) throw Error("null_ratio must be in [0, 1]");
    if (!(clip_norm > 0.0)) throw Error("clip_norm must be positive");
    if (per_label_cap < 1) throw Error("per_label_cap must be >= 1");
    batch_spec.validate();
    scl.validate();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["learning_rate"] = c.learning_rate;
  j["warmup_ratio"] = c.warmup_ratio;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["epochs_pretrain"] = c.epochs_pretrain;
  j["epochs_finetune"] = c.epochs_finetune;
  j["null_ratio"] = c.null_ratio;
  j["labels_per_batch"] = c.batch_spec.labels_per_batch;
  j["instances_per_label"] = c.batch_spec.instances_per_label;
  j["same_dataset_only"] = c.same_dataset_only;
  j["seed"] = c.seed;
  j["temperature"] = c.scl.temperature;
  j["p_count_convention"] = c.scl.p_count == PCountConvention::kLiteral ? "literal" : "exclude_self";
  j["per_label_cap"] = c.per_label_cap;
  j["label_key_scope"] = c.label_key_scope == LabelKeyScope::kGlobal ? "global" : "per_dataset";
  j["embed_dim"] = c.shape.embed_dim;
  j["out_dim"] = c.shape.out_dim;
  j["aggregation"] = c.predictor.aggregation == Aggregation::kMax ? "max" : "mean";
  j["multiple_choice_query"] = c.predictor.multiple_choice_query;
  return j;
}

// Overlays every key present in `j` onto `c`; unknown keys are rejected so a
// typo in a config file does not silently fall back to a default.
inline void apply_json(TrainConfig& c, const nlohmann::json& j) {
  for (const auto& [key, v] : j.items()) {
    if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "warmup_ratio") c.warmup_ratio = v.get<double>();
    else if (key == "weight_decay") c.weight_decay = v.get<double>();
    else if (key == "clip_norm") c.clip_norm = v.get<double>();
    else if (key == "epochs_pretrain") c.epochs_pretrain = v.get<std::size_t>();
    else if (key == "epochs_finetune") c.epochs_finetune = v.get<std::size_t>();
    else if (key == "null_ratio") c.null_ratio = v.get<double>();
    else if (key == "labels_per_batch") c.batch_spec.labels_per_batch = v.get<std::size_t>();
    else if (key == "instances_per_label") c.batch_spec.instances_per_label = v.get<std::size_t>();
    else if (key == "same_dataset_only") c.same_dataset_only = v.get<bool>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "temperature") c.scl.temperature = v.get<double>();
    else if (key == "p_count_convention") {
      const auto s = v.get<std::string>();
      if (s == "literal") c.scl.p_count = PCountConvention::kLiteral;
      else if (s == "exclude_self") c.scl.p_count = PCountConvention::kExcludeSelf;
      else throw Error("config: p_count_convention must be literal or exclude_self");
    } else if (key == "per_label_cap") c.per_label_cap = v.get<std::size_t>();
    else if (key == "label_key_scope") {
      const auto s = v.get<std::string>();
      if (s == "global") c.label_key_scope = LabelKeyScope::kGlobal;
      else if (s == "per_dataset") c.label_key_scope = LabelKeyScope::kPerDataset;
      else throw Error("config: label_key_scope must be global or per_dataset");
    } else if (key == "embed_dim") c.shape.embed_dim = v.get<std::size_t>();
    else if (key == "out_dim") c.shape.out_dim = v.get<std::size_t>();
    else if (key == "aggregation") {
      const auto s = v.get<std::string>();
      if (s == "max") c.predictor.aggregation = Aggregation::kMax;
      else if (s == "mean") c.predictor.aggregation = Aggregation::kMean;
      else throw Error("config: aggregation must be max or mean");
    } else if (key == "multiple_choice_query") c.predictor.multiple_choice_query = v.get<bool>();
    else throw Error("config: unknown key '" + key + "'");
  }
  c.validate();
}

inline TrainConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open config " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("config " + file.string() + ": " + ex.what());
  }
  TrainConfig c;
  apply_json(c, j);
  return c;
}

inline std::string config_hash(const TrainConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

}  // namespace entail
