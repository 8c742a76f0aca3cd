#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/checkpoint.hpp"
#include "entail/config.hpp"
#include "entail/efl.hpp"
#include "entail/manifest.hpp"
#include "entail/predictor.hpp"
#include "entail/sampler.hpp"
#include "entail/training.hpp"

namespace entail {

inline constexpr std::string_view kModelRandom = "Random";
inline constexpr std::string_view kLibraryVersion = "0.1.0";

struct DatasetResult {
  std::string dataset_id;
  std::string model;
  std::size_t k = 0;
  bool seen = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;  // one per repetition
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::string model;
  std::size_t k = 0;
  std::size_t repetitions = 1;
  std::string checkpoint_hash;
  std::string config_hash;
  std::vector<DatasetResult> datasets;

  // Arithmetic mean of the per-dataset means.
  double average() const {
    if (datasets.empty()) return 0.0;
    double s = 0.0;
    for (const auto& d : datasets) s += d.mean;
    return s / static_cast<double>(datasets.size());
  }

  const DatasetResult& find(std::string_view id) const {
    for (const auto& d : datasets) {
      if (d.dataset_id == id) return d;
    }
    throw Error("report has no dataset '" + std::string(id) + "'");
  }
};

// Population standard deviation; 0 for a single repetition. Deviations are
// taken from the first sample so identical accuracies give exactly 0.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  double shift = 0.0;
  for (double x : xs) shift += x - xs.front();
  shift /= n;
  double var = 0.0;
  for (double x : xs) var += (x - xs.front() - shift) * (x - xs.front() - shift);
  return {xs.front() + shift, std::sqrt(var / n)};
}

inline void finalize(DatasetResult& r) {
  auto [m, s] = mean_std(r.accuracies);
  r.mean = m;
  r.std = s;
}

template <typename Classify>
double accuracy(const std::vector<RawExample>& test, const LabelSet& labels, Classify&& classify) {
  if (test.empty()) throw Error("dataset '" + labels.dataset_id() + "' has an empty test split");
  std::size_t correct = 0;
  for (const auto& ex : test) correct += classify(ex) == *labels.index_of(ex.label);
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

inline std::size_t classify_with(const Checkpoint& ck, const Predictor& predictor,
                                 const SupportSet& support, const RawExample& ex) {
  if (ck.model == kModelEfl) return efl_predict(ck, ex.text, support.labels).label_index;
  return predictor.predict(ex.text, support, support.labels).label_index;
}

// Seed of repetition r on one dataset; distinct per (dataset, repetition).
inline std::uint64_t repetition_seed(std::uint64_t base, std::string_view dataset_id,
                                     std::size_t r) {
  return fnv1a(dataset_id, base * 0x9E3779B97F4A7C15ULL + r + 1);
}

// Zero-shot: empty support set, label names only, one repetition. Only the
// evaluation split of each test dataset is read.
inline EvalReport evaluate_zero_shot(const Checkpoint& ck, const DatasetManifest& manifest,
                                     DatasetReader& reader, const TrainConfig& cfg) {
  EvalReport rep;
  rep.model = ck.model;
  rep.k = 0;
  rep.checkpoint_hash = ck.fingerprint();
  rep.config_hash = config_hash(cfg);
  const Predictor predictor(ck.encoder, cfg.predictor);
  for (const auto* d : manifest.partition(Partition::kTest)) {
    if (d->labels.empty()) throw Error("dataset '" + d->id + "' has no label set");
    const auto test = reader.read(d->path, *d);
    SupportSet empty;
    empty.labels = d->labels;
    DatasetResult r{d->id, ck.model, 0, d->seen, {}, {}, 0.0, 0.0};
    r.accuracies.push_back(accuracy(
        test, d->labels, [&](const RawExample& ex) { return classify_with(ck, predictor, empty, ex); }));
    finalize(r);
    rep.datasets.push_back(std::move(r));
  }
  return rep;
}

struct FewShotProtocol {
  std::size_t k = 10;
  std::size_t repetitions = 3;
  std::uint64_t base_seed = 13;
  // Explicit per-repetition seeds; when empty they derive from base_seed.
  std::vector<std::uint64_t> seeds;
};

// Each repetition samples a fresh support set, fine-tunes a fresh copy of
// `ck` on it and evaluates on the full evaluation split.
inline EvalReport evaluate_few_shot(const Checkpoint& ck, const DatasetManifest& manifest,
                                    DatasetReader& reader, const TrainConfig& cfg,
                                    const FewShotProtocol& protocol) {
  if (protocol.k < 1) throw Error("few-shot evaluation needs k >= 1");
  if (protocol.repetitions < 1) throw Error("few-shot evaluation needs at least one repetition");
  if (!protocol.seeds.empty() && protocol.seeds.size() != protocol.repetitions) {
    throw Error("explicit seed list must have one seed per repetition");
  }
  EvalReport rep;
  rep.model = ck.model;
  rep.k = protocol.k;
  rep.repetitions = protocol.repetitions;
  rep.checkpoint_hash = ck.fingerprint();
  rep.config_hash = config_hash(cfg);
  for (const auto* d : manifest.partition(Partition::kTest)) {
    const auto train = reader.read(d->train_path, *d);
    const auto test = reader.read(d->path, *d);
    DatasetResult r{d->id, ck.model, protocol.k, d->seen, {}, {}, 0.0, 0.0};
    for (std::size_t i = 0; i < protocol.repetitions; ++i) {
      const auto seed = protocol.seeds.empty() ? repetition_seed(protocol.base_seed, d->id, i)
                                               : protocol.seeds[i];
      const auto support = sample_support_set(train, d->labels, protocol.k, seed);
      const Checkpoint tuned = ck.model == kModelEfl ? finetune_efl(ck, support, cfg).checkpoint
                                                     : finetune(ck, support, cfg).checkpoint;
      const Predictor predictor(tuned.encoder, cfg.predictor);
      r.seeds.push_back(seed);
      r.accuracies.push_back(accuracy(test, d->labels, [&](const RawExample& ex) {
        return classify_with(tuned, predictor, support, ex);
      }));
    }
    finalize(r);
    rep.datasets.push_back(std::move(r));
  }
  return rep;
}

// Uniform random guessing, the reference row of the results table.
inline EvalReport evaluate_random(const DatasetManifest& manifest, DatasetReader& reader,
                                  std::uint64_t seed, std::size_t k = 0) {
  EvalReport rep;
  rep.model = std::string(kModelRandom);
  rep.k = k;
  for (const auto* d : manifest.partition(Partition::kTest)) {
    const auto test = reader.read(d->path, *d);
    const auto s = repetition_seed(seed, d->id, 0);
    Rng rng(s);
    std::uniform_int_distribution<std::size_t> pick(0, d->labels.size() - 1);
    DatasetResult r{d->id, rep.model, k, d->seen, {s}, {}, 0.0, 0.0};
    r.accuracies.push_back(accuracy(test, d->labels, [&](const RawExample&) { return pick(rng); }));
    finalize(r);
    rep.datasets.push_back(std::move(r));
  }
  return rep;
}

// (acc_with - acc_without) / acc_without.
inline double relative_performance_gain(double acc_with, double acc_without) {
  if (!(acc_without > 0.0)) {
    throw Error("relative performance gain is undefined for a zero baseline accuracy");
  }
  return (acc_with - acc_without) / acc_without;
}

// --- reporting ---------------------------------------------------------------

inline nlohmann::json to_json(const DatasetResult& r) {
  return {{"dataset_id", r.dataset_id}, {"model", r.model},   {"k", r.k},
          {"seen", r.seen},             {"repetition_seeds", r.seeds},
          {"accuracies", r.accuracies}, {"mean", r.mean},     {"std", r.std}};
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : rep.datasets) ds.push_back(to_json(d));
  return {{"model", rep.model},
          {"k", rep.k},
          {"repetitions", rep.repetitions},
          {"checkpoint_hash", rep.checkpoint_hash},
          {"config_hash", rep.config_hash},
          {"average", rep.average()},
          {"datasets", std::move(ds)}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  rep.model = j.at("model").get<std::string>();
  rep.k = j.at("k").get<std::size_t>();
  rep.repetitions = j.value("repetitions", std::size_t{1});
  rep.checkpoint_hash = j.value("checkpoint_hash", std::string{});
  rep.config_hash = j.value("config_hash", std::string{});
  for (const auto& d : j.at("datasets")) {
    DatasetResult r;
    r.dataset_id = d.at("dataset_id").get<std::string>();
    r.model = d.at("model").get<std::string>();
    r.k = d.at("k").get<std::size_t>();
    r.seen = d.at("seen").get<bool>();
    r.seeds = d.at("repetition_seeds").get<std::vector<std::uint64_t>>();
    r.accuracies = d.at("accuracies").get<std::vector<double>>();
    r.mean = d.at("mean").get<double>();
    r.std = d.at("std").get<double>();
    rep.datasets.push_back(std::move(r));
  }
  return rep;
}

inline std::string format_cell(const DatasetResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * r.mean;
  if (r.accuracies.size() > 1) os << " ± " << std::setprecision(1) << 100.0 * r.std;
  return os.str();
}

// Markdown table: one section per shot count, one row per model, one column
// per test dataset (tagged seen/unseen) plus the average.
inline std::string render_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  std::vector<std::pair<std::string, bool>> columns;
  for (const auto& rep : reports) {
    for (const auto& d : rep.datasets) {
      bool known = std::any_of(columns.begin(), columns.end(),
                               [&](const auto& c) { return c.first == d.dataset_id; });
      if (!known) columns.emplace_back(d.dataset_id, d.seen);
    }
  }
  std::map<std::size_t, std::vector<const EvalReport*>> by_k;
  for (const auto& rep : reports) by_k[rep.k].push_back(&rep);

  std::ostringstream os;
  os << "| Method |";
  for (const auto& [id, seen] : columns) os << ' ' << id << " (" << (seen ? "seen" : "unseen") << ") |";
  os << " AVG |\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
  os << "---|\n";
  for (const auto& [k, reps] : by_k) {
    os << "| *" << k << "-shot* |";
    for (std::size_t i = 0; i <= columns.size(); ++i) os << " |";
    os << '\n';
    for (const auto* rep : reps) {
      os << "| " << rep->model << " |";
      for (const auto& [id, seen] : columns) {
        auto it = std::find_if(rep->datasets.begin(), rep->datasets.end(),
                               [&](const DatasetResult& d) { return d.dataset_id == id; });
        os << ' ' << (it == rep->datasets.end() ? std::string("-") : format_cell(*it)) << " |";
      }
      os << ' ' << std::fixed << std::setprecision(1) << 100.0 * rep->average() << " |\n";
    }
  }
  return os.str();
}

inline std::string provenance(const std::vector<EvalReport>& reports) {
  std::string s = "entail-" + std::string(kLibraryVersion);
  for (const auto& r : reports) {
    if (!r.config_hash.empty()) s += "+cfg." + r.config_hash;
    if (!r.checkpoint_hash.empty()) s += "+ckpt." + r.checkpoint_hash;
  }
  return s;
}

// results.json (structured records) and results.md (rendered table). No
// timestamps, so identical runs give identical bytes.
inline void emit_report(const std::vector<EvalReport>& reports, const fs::path& out_dir,
                        std::string_view stem = "results") {
  if (reports.empty()) throw Error("emit_report needs at least one report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  nlohmann::json j;
  j["provenance"] = provenance(reports);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  j["reports"] = std::move(arr);

  const auto json_path = out_dir / (std::string(stem) + ".json");
  std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw Error("cannot write " + json_path.string());
  js << j.dump(2) << '\n';
  const auto md_path = out_dir / (std::string(stem) + ".md");
  std::ofstream md(md_path, std::ios::binary | std::ios::trunc);
  if (!md) throw Error("cannot write " + md_path.string());
  md << "provenance: " << provenance(reports) << "\n\n" << render_table(reports);
  if (!js || !md) throw Error("failed writing report to " + out_dir.string());
}

inline std::vector<EvalReport> load_reports(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  nlohmann::json j;
  in >> j;
  std::vector<EvalReport> out;
  for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
  return out;
}

}  // namespace entail
