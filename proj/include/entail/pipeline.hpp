#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/checkpoint.hpp"
#include "entail/config.hpp"
#include "entail/efl.hpp"
#include "entail/eval.hpp"
#include "entail/manifest.hpp"
#include "entail/meta_task.hpp"
#include "entail/training.hpp"

// File-level steps of a run: prepare -> pretrain -> evaluate. The CLI is a thin
// wrapper over these.

namespace entail::pipeline {

inline constexpr const char* kOutputRootEnv = "ENTAIL_OUT";

// --out, then $ENTAIL_OUT, then ./runs.
inline fs::path output_root(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

inline fs::path meta_path(const fs::path& root) { return root / "meta.jsonl"; }
inline fs::path build_report_path(const fs::path& root) { return root / "build_report.json"; }

inline std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline fs::path default_checkpoint(const fs::path& root, std::string_view model) {
  return root / (lowercase(std::string(model)) + ".ckpt");
}

inline fs::path loss_curve_path(const fs::path& ckpt) {
  fs::path p = ckpt;
  p.replace_extension(".loss.jsonl");
  return p;
}

inline void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
  if (!out) throw Error("failed writing " + file.string());
}

// Builds the meta-dataset from the pretrain partition and writes it with its
// build report.
inline MetaDataset prepare(const fs::path& manifest_file, const TrainConfig& cfg,
                           const fs::path& root) {
  const auto manifest = load_manifest(manifest_file);
  DatasetReader reader;
  auto meta =
      build_meta_dataset(manifest, cfg.per_label_cap, cfg.seed, reader, cfg.label_key_scope);
  fs::create_directories(root);
  write_meta_file(meta_path(root), meta.examples);
  write_text_file(build_report_path(root), meta.report.to_json().dump(2) + "\n");
  return meta;
}

// Trains `model` (ConEntail or EFL) on the prepared meta-dataset and writes the
// checkpoint plus its per-step loss curve. epochs_pretrain = 0 yields the
// untrained control.
inline TrainResult pretrain_model(const fs::path& manifest_file, const fs::path& meta_file,
                                  const TrainConfig& cfg, std::string_view model,
                                  const fs::path& ckpt_file) {
  const auto manifest = load_manifest(manifest_file);
  const auto meta = read_meta_file(meta_file);
  if (meta.empty()) throw Error("meta-dataset " + meta_file.string() + " is empty");
  auto tok = pretraining_tokenizer(meta, manifest);
  TrainResult result = [&] {
    if (model == kModelEfl) {
      return train_efl_baseline(initial_efl_checkpoint(std::move(tok), cfg), meta, manifest, cfg);
    }
    if (model != kModelContrastive) throw Error("unknown model '" + std::string(model) + "'");
    TrainHooks hooks;
    for (const auto* d : manifest.partition(Partition::kTest)) hooks.forbidden_datasets.insert(d->id);
    return pretrain(initial_checkpoint(std::move(tok), cfg), meta, cfg, hooks);
  }();
  if (ckpt_file.has_parent_path()) fs::create_directories(ckpt_file.parent_path());
  save_checkpoint(result.checkpoint, ckpt_file);
  std::string curve;
  for (const auto& r : result.curve) curve += to_json(r).dump() + "\n";
  write_text_file(loss_curve_path(ckpt_file), curve);
  return result;
}

inline EvalReport eval_zero(const Checkpoint& ck, const fs::path& manifest_file,
                            const TrainConfig& cfg) {
  const auto manifest = load_manifest(manifest_file);
  DatasetReader reader;
  return evaluate_zero_shot(ck, manifest, reader, cfg);
}

inline EvalReport eval_few(const Checkpoint& ck, const fs::path& manifest_file,
                           const TrainConfig& cfg, const FewShotProtocol& protocol) {
  const auto manifest = load_manifest(manifest_file);
  DatasetReader reader;
  return evaluate_few_shot(ck, manifest, reader, cfg, protocol);
}

inline EvalReport eval_random(const fs::path& manifest_file, std::uint64_t seed, std::size_t k) {
  const auto manifest = load_manifest(manifest_file);
  DatasetReader reader;
  return evaluate_random(manifest, reader, seed, k);
}

// One report per shot count; k = 0 is the zero-shot protocol.
inline std::vector<EvalReport> sweep(const Checkpoint& ck, const fs::path& manifest_file,
                                     const TrainConfig& cfg, const std::vector<std::size_t>& ks,
                                     std::size_t repetitions, std::uint64_t base_seed) {
  std::vector<EvalReport> out;
  for (auto k : ks) {
    if (k == 0) {
      out.push_back(eval_zero(ck, manifest_file, cfg));
    } else {
      out.push_back(eval_few(ck, manifest_file, cfg, {k, repetitions, base_seed, {}}));
    }
  }
  return out;
}

// Markdown table of the first `n` evaluation sentences of one test dataset,
// each with its zero-shot label ranking.
inline std::string case_study(const Checkpoint& ck, const fs::path& manifest_file,
                              const TrainConfig& cfg, std::string_view dataset_id, std::size_t n) {
  const auto manifest = load_manifest(manifest_file);
  const auto& d = manifest.find(dataset_id);
  DatasetReader reader;
  const auto test = reader.read(d.path, d);
  const Predictor predictor(ck.encoder, cfg.predictor);
  std::ostringstream os;
  os << "| Input | Gold | Ranked labels |\n|---|---|---|\n";
  for (std::size_t i = 0; i < std::min(n, test.size()); ++i) {
    os << "| " << test[i].text << " | " << test[i].label << " |";
    const auto ranked = predictor.rank_labels(test[i].text, d.labels);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      os << (r ? ", " : " ") << '(' << ranked[r].label << ", " << std::fixed
         << std::setprecision(2) << ranked[r].score << ')';
    }
    os << " |\n";
  }
  return os.str();
}

}  // namespace entail::pipeline
