// Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "entail/entail.hpp"
#include "fakes.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace entail;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void check(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += "; over time limit";
  }
  if (!o.pass) ++failures;
  char t[64];
  std::snprintf(t, sizeof t, "%.2f s", secs);
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << o.detail << " ("
            << t;
  if (limit_s > 0) std::cout << ", limit " << limit_s << " s";
  std::cout << ")" << std::endl;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// Synthetic world shared by criteria 6-8: suite, meta-dataset, pinned config.
struct World {
  testing::TempDir dir{"acceptance"};
  DatasetManifest manifest;
  std::vector<MetaExample> meta;
  TrainConfig cfg;

  World() {
    manifest = load_manifest(synthetic::write_suite(dir.path(), 7));
    cfg.learning_rate = 1e-2;
    cfg.epochs_pretrain = 20;
    cfg.epochs_finetune = 10;
    cfg.seed = 7;
    DatasetReader reader;
    meta = build_meta_dataset(manifest, cfg.per_label_cap, cfg.seed, reader).examples;
  }

  Checkpoint untrained() const {
    return initial_checkpoint(pretraining_tokenizer(meta, manifest), cfg);
  }
};

World& world() {
  static World w;
  return w;
}

std::optional<Checkpoint> pretrained;

Outcome scl_oracle() {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> size(3, 12);
  const double taus[] = {0.05, 0.07, 1.0};
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto in = testing::random_scl_instance(rng, size(rng), taus[t % 3]);
    const double main =
        scl_loss(testing::to_matrix(in.S), build_positive_mask(in.y), {in.tau});
    worst = std::max(worst, std::abs(main - oracle::scl_loss(in.S, in.y, in.tau)));
  }
  return {worst <= 1e-9, "max |main - double loop| = " + fmt(worst) + " over 1000 instances (tol 1e-9)"};
}

Outcome gradients() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(3, 12);
  const double taus[] = {0.05, 0.07, 1.0};
  double worst_s = 0.0;
  for (int t = 0; t < 50; ++t) {
    worst_s = std::max(worst_s, testing::scl_gradient_error(
                                    testing::random_scl_instance(rng, size(rng), taus[t % 3])));
  }

  // encoder parameters, through cosine and both towers
  const auto& w = world();
  const BalancedBatchSampler sampler(w.meta, {4, 2});
  Rng brng(5);
  const auto batch = sampler.epoch(brng).front();
  const ToyEncoder base(pretraining_tokenizer(w.meta, w.manifest), {8, 6}, 3);
  std::vector<std::string> q, ph, keys;
  for (auto i : batch) {
    q.push_back(w.meta[i].query);
    ph.push_back(base.premise_hypothesis_sequence(w.meta[i].premise, w.meta[i].hypothesis));
    keys.push_back(w.meta[i].label_key);
  }
  const SCLParams scl{0.07};
  const auto lg = contrastive_loss_and_grad(base, q, ph, keys, scl);
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < base.param_count(); ++i) {
    if (lg.grad[i] == 0.0 && i < base.weight_offset()) continue;  // tokens absent from the batch
    const double fd = oracle::central_difference(
        [&](const Vec& p) {
          return contrastive_loss_and_grad(ToyEncoder(base.tokenizer(), base.shape(), p), q, ph,
                                           keys, scl)
              .loss;
        },
        base.params(), i, 1e-6);
    diff = std::max(diff, std::abs(lg.grad[i] - fd));
    scale = std::max(scale, std::abs(lg.grad[i]));
  }
  const double worst_e = diff / scale;
  return {worst_s <= 1e-6 && worst_e <= 1e-4,
          "dL/dS relative error " + fmt(worst_s) + " (tol 1e-6, 50 instances); encoder " +
              fmt(worst_e) + " (tol 1e-4)"};
}

Outcome predictor_oracle() {
  Rng rng(2024);
  const std::size_t ks[] = {0, 1, 5, 10};
  std::size_t agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n_labels = 2 + static_cast<std::size_t>(t % 5);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_labels; ++i) names.push_back("label" + std::to_string(i));
    const LabelSet labels("ds", names);
    const std::size_t k = ks[t % 4];
    const auto support = testing::random_support(labels, k, rng);
    const testing::HashEncoder enc(6, static_cast<std::uint64_t>(t));
    const std::string text = "query " + std::to_string(t);
    std::vector<Vec> cand;
    std::vector<std::size_t> owner;
    if (k == 0) {
      for (std::size_t l = 0; l < n_labels; ++l) {
        cand.push_back(enc.encode("NULL [SEP] " + names[l]));
        owner.push_back(l);
      }
    } else {
      for (const auto& e : support.entries) {
        cand.push_back(enc.encode("sentence: " + e.example.text + " [SEP] " + e.example.label));
        owner.push_back(*labels.index_of(e.example.label));
      }
    }
    const auto expected = oracle::exhaustive_argmax(
        enc.encode(multiple_choice_query(text, labels)), cand, owner, n_labels);
    agree += Predictor(enc).predict(text, support, labels).label_index == expected;
  }
  return {agree == 1000, std::to_string(agree) + "/1000 trials agree with exhaustive argmax"};
}

Outcome sampler_exactness() {
  std::vector<MetaExample> pool;
  for (int l = 0; l < 12; ++l) {
    for (int i = 0; i < 50; ++i) {
      const auto key = "label" + std::to_string(l);
      pool.push_back({"q" + std::to_string(i), "p", key, key, "d" + std::to_string(l % 3)});
    }
  }
  const BatchSpec spec;  // 8 labels x 4 instances
  const BalancedBatchSampler sampler(pool, spec);
  Rng rng(11);
  BatchStream stream(sampler, rng);
  std::map<std::string, int> freq;
  std::size_t bad = 0;
  const int n = 10000;
  for (int b = 0; b < n; ++b) {
    std::map<std::string, std::size_t> per;
    for (auto i : stream.next()) per[pool[i].label_key]++;
    bool ok = per.size() == spec.labels_per_batch;
    for (const auto& [l, c] : per) {
      ok = ok && c == spec.instances_per_label;
      freq[l]++;
    }
    bad += !ok;
  }
  // a label is in a batch with probability 8/12
  const double p = 8.0 / 12.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  double worst = 0.0;
  for (const auto& [l, c] : freq) worst = std::max(worst, std::abs(c - n * p) / sigma);
  return {bad == 0 && freq.size() == 12 && worst <= 3.0,
          std::to_string(bad) + " malformed of 10000 batches; max label deviation " + fmt(worst, 3) +
              " sigma (tol 3)"};
}

Outcome null_ratio() {
  std::vector<MetaExample> items(10000, MetaExample{"q", "sentence: x", "h", "h", "d"});
  Rng rng(77);
  const auto out = nullify_premises(items, 0.05, rng);
  std::size_t nulls = 0;
  for (const auto& m : out) nulls += m.premise == kNullPremise;
  const double frac = static_cast<double>(nulls) / 10000.0;
  return {frac >= 0.0435 && frac <= 0.0565, "realized NULL fraction " + fmt(frac) + " (band [0.0435, 0.0565])"};
}

Outcome synthetic_zero_shot() {
  auto& w = world();
  TrainHooks hooks;
  for (const auto* d : w.manifest.partition(Partition::kTest)) hooks.forbidden_datasets.insert(d->id);
  pretrained = pretrain(w.untrained(), w.meta, w.cfg, hooks).checkpoint;
  DatasetReader reader;
  const double acc = evaluate_zero_shot(*pretrained, w.manifest, reader, w.cfg).find("topic4").mean;
  const double rnd = evaluate_random(w.manifest, reader, w.cfg.seed).find("topic4").mean;
  const double band = 3.0 * std::sqrt(0.25 * 0.75 / 400.0);
  const bool rnd_ok = std::abs(rnd - 0.25) <= band;
  return {acc >= 0.80 && rnd_ok, "topic4 zero-shot " + fmt(acc) + " (>= 0.80); random reference " +
                                     fmt(rnd) + " (25% +- " + fmt(band, 3) + ")"};
}

Outcome few_shot_trend() {
  if (!pretrained) return {false, "needs the checkpoint from criterion 6"};
  auto& w = world();
  DatasetReader reader;
  const auto zero = evaluate_zero_shot(*pretrained, w.manifest, reader, w.cfg);
  std::vector<EvalReport> sweep{zero};
  for (std::size_t k : {10, 20, 40, 80}) {
    sweep.push_back(evaluate_few_shot(*pretrained, w.manifest, reader, w.cfg, {k, 3, w.cfg.seed, {}}));
  }
  std::string detail;
  bool ok = true;
  for (const auto& d : zero.datasets) {
    const double ten = sweep[1].find(d.dataset_id).mean;
    if (ten < d.mean) {
      ok = false;
      detail += d.dataset_id + " 10-shot " + fmt(ten) + " < zero-shot " + fmt(d.mean) + "; ";
    }
    double pooled = 0.0;
    for (const auto& r : sweep) pooled += std::pow(r.find(d.dataset_id).std, 2);
    pooled = std::sqrt(pooled / static_cast<double>(sweep.size()));
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      const double prev = sweep[i - 1].find(d.dataset_id).mean;
      const double cur = sweep[i].find(d.dataset_id).mean;
      if (cur < prev - pooled) {
        ok = false;
        detail += d.dataset_id + " drops at k=" + std::to_string(sweep[i].k) + "; ";
      }
    }
  }
  std::string means;
  for (const auto& r : sweep) means += (means.empty() ? "" : ", ") + fmt(r.average(), 3);
  return {ok, detail + "suite means over k {0,10,20,40,80}: " + means};
}

Outcome paired_baselines() {
  if (!pretrained) return {false, "needs the checkpoint from criterion 6"};
  auto& w = world();
  DatasetReader reader;
  const auto efl = train_efl_baseline(
                       initial_efl_checkpoint(pretraining_tokenizer(w.meta, w.manifest), w.cfg),
                       w.meta, w.manifest, w.cfg)
                       .checkpoint;
  const FewShotProtocol protocol{10, 3, w.cfg.seed, {}};
  auto control = evaluate_zero_shot(w.untrained(), w.manifest, reader, w.cfg);
  control.model = "ConEntail w/o pretraining";
  for (auto& d : control.datasets) d.model = control.model;
  const std::vector<EvalReport> reports{
      evaluate_zero_shot(*pretrained, w.manifest, reader, w.cfg),
      evaluate_zero_shot(efl, w.manifest, reader, w.cfg),
      control,
      evaluate_random(w.manifest, reader, w.cfg.seed, 0),
      evaluate_few_shot(*pretrained, w.manifest, reader, w.cfg, protocol),
      evaluate_few_shot(efl, w.manifest, reader, w.cfg, protocol),
      evaluate_random(w.manifest, reader, w.cfg.seed, 10),
  };
  const auto table = render_table(reports);
  std::cout << table;
  bool layout = true;
  for (const char* needle : {"| *0-shot* |", "| *10-shot* |", "| ConEntail |", "| EFL |",
                             "| Random |", "(seen)", "(unseen)", " ± ", "AVG"}) {
    layout = layout && table.find(needle) != std::string::npos;
  }
  bool paired = true;
  for (const auto& d : reports[4].datasets) paired = paired && d.seeds == reports[5].find(d.dataset_id).seeds;
  const double gap = reports[0].average() - control.average();
  return {layout && paired && gap >= 0.30,
          std::string("table layout ") + (layout ? "ok" : "wrong") + "; paired seeds " +
              (paired ? "ok" : "differ") + "; zero-shot " + fmt(reports[0].average(), 3) +
              " vs untrained control " + fmt(control.average(), 3) + " (gap >= 0.30)"};
}

Outcome rpg() {
  const double v = relative_performance_gain(0.632, 0.498);
  bool same = true;
  for (double x : {0.1, 0.498, 0.632, 1.0}) same = same && relative_performance_gain(x, x) == 0.0;
  return {std::abs(v - 0.2691) <= 1e-4 && same, "rpg(0.632, 0.498) = " + fmt(v, 6) + "; rpg(x, x) == 0"};
}

Outcome determinism() {
  auto run = [](const fs::path& root) {
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.seed = 7;
    const auto manifest = synthetic::write_suite(root / "data", cfg.seed);
    pipeline::prepare(manifest, cfg, root);
    const auto ckpt = pipeline::default_checkpoint(root, kModelContrastive);
    pipeline::pretrain_model(manifest, pipeline::meta_path(root), cfg, kModelContrastive, ckpt);
    emit_report({pipeline::eval_zero(load_checkpoint(ckpt), manifest, cfg)}, root, "zero_shot");
  };
  testing::TempDir a("det_a");
  testing::TempDir b("det_b");
  run(a.path());
  run(b.path());
  std::size_t same = 0;
  std::size_t total = 0;
  for (const char* f : {"meta.jsonl", "conentail.ckpt", "conentail.loss.jsonl", "zero_shot.json",
                        "zero_shot.md"}) {
    ++total;
    same += testing::slurp(a / f) == testing::slurp(b / f) && !testing::slurp(a / f).empty();
  }
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " output files byte-identical"};
}

}  // namespace

int main() {
  check(1, "SCL loss oracle equivalence", 10, scl_oracle);
  check(2, "gradient correctness", 30, gradients);
  check(3, "predictor oracle", 10, predictor_oracle);
  check(4, "balanced sampler exactness", 0, sampler_exactness);
  check(5, "NULL-ratio statistics", 0, null_ratio);
  check(6, "synthetic end-to-end zero-shot", 300, synthetic_zero_shot);
  check(7, "few-shot trend", 0, few_shot_trend);
  check(8, "paired baseline comparison", 0, paired_baselines);
  check(9, "relative performance gain arithmetic", 0, rpg);
  check(10, "pipeline determinism", 0, determinism);
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
