#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entail/checkpoint.hpp"
#include "entail/config.hpp"
#include "entail/contrastive.hpp"
#include "entail/encoder.hpp"
#include "entail/error.hpp"
#include "entail/meta_task.hpp"
#include "entail/optimizer.hpp"
#include "entail/sampler.hpp"

namespace entail {

struct LossAndGrad {
  double loss = 0.0;
  Vec grad;  // same layout as ToyEncoder::params()
};

// Contrastive loss of one batch and its exact gradient w.r.t. every encoder
// parameter. Row i of the similarity matrix is query i, column j is
// premise-hypothesis sequence j; gradients flow through both sides.
inline LossAndGrad contrastive_loss_and_grad(const ToyEncoder& enc,
                                             const std::vector<std::string>& queries,
                                             const std::vector<std::string>& ph_sequences,
                                             const std::vector<std::string>& label_keys,
                                             const SCLParams& scl) {
  const std::size_t n = queries.size();
  if (ph_sequences.size() != n || label_keys.size() != n) {
    throw Error("batch columns have different lengths");
  }
  std::vector<ToyEncoder::Forward> fq;
  std::vector<ToyEncoder::Forward> fph;
  fq.reserve(n);
  fph.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    fq.push_back(enc.forward(queries[i]));
    fph.push_back(enc.forward(ph_sequences[i]));
  }
  Matrix S(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) S(i, j) = cosine_similarity(fq[i].out, fph[j].out);
  }
  const auto mask = build_positive_mask(label_keys);
  LossAndGrad out;
  out.loss = scl_loss(S, mask, scl);
  const Matrix G = scl_loss_gradient(S, mask, scl);

  const std::size_t d = enc.dim();
  std::vector<Vec> gq(n, Vec(d, 0.0));
  std::vector<Vec> gph(n, Vec(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = G(i, j);
      if (g == 0.0) continue;
      const auto [ga, gb] = cosine_gradient(fq[i].out, fph[j].out);
      for (std::size_t k = 0; k < d; ++k) {
        gq[i][k] += g * ga[k];
        gph[j][k] += g * gb[k];
      }
    }
  }
  out.grad.assign(enc.param_count(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    enc.backward(fq[i], gq[i], out.grad);
    enc.backward(fph[i], gph[i], out.grad);
  }
  return out;
}

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step}, {"epoch", r.epoch}, {"loss", r.loss}, {"lr", r.lr}};
}

struct TrainHooks {
  // Dataset ids that must never appear in a training batch.
  std::set<std::string> forbidden_datasets;
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch, const std::vector<MetaExample>&)> on_epoch_examples;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> curve;
  std::vector<double> epoch_mean_loss;
};

namespace detail {

struct EpochPlan {
  std::vector<MetaExample> examples;  // premises re-drawn for NULL
  std::vector<Batch> batches;
};

inline void apply_update(Checkpoint& ck, Vec& grad, double lr, double clip_norm) {
  clip_global_norm(grad, clip_norm);
  Vec& params = ck.encoder.params();
  if (ck.head.empty()) {
    ck.optimizer.step(params, grad, lr);
    return;
  }
  Vec all(params);
  all.insert(all.end(), ck.head.begin(), ck.head.end());
  ck.optimizer.step(all, grad, lr);
  std::copy(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(params.size()), params.begin());
  std::copy(all.begin() + static_cast<std::ptrdiff_t>(params.size()), all.end(), ck.head.begin());
}

// Runs the contrastive objective over `meta` for `epochs` passes starting from
// `ck`. The optimizer is reset; the schedule covers exactly these epochs.
inline TrainResult contrastive_train(Checkpoint ck, const std::vector<MetaExample>& meta,
                                     const TrainConfig& cfg, BatchSpec spec, std::size_t epochs,
                                     std::uint64_t seed, const TrainHooks& hooks) {
  const BalancedBatchSampler sampler(meta, spec, cfg.same_dataset_only);
  Rng rng(seed);
  std::vector<EpochPlan> plans;
  std::size_t total_steps = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    EpochPlan plan;
    plan.examples = nullify_premises(meta, cfg.null_ratio, rng);
    plan.batches = sampler.epoch(rng);
    total_steps += plan.batches.size();
    plans.push_back(std::move(plan));
  }

  ck.optimizer = AdamW(ck.encoder.param_count(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  ck.encoder.set_mode(Mode::kTrain);
  TrainResult result{std::move(ck), {}, {}};
  Checkpoint& cur = result.checkpoint;

  std::size_t step = 0;
  for (std::size_t e = 0; e < plans.size(); ++e) {
    const auto& plan = plans[e];
    if (hooks.on_epoch_examples) hooks.on_epoch_examples(e, plan.examples);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      std::vector<std::string> q;
      std::vector<std::string> ph;
      std::vector<std::string> keys;
      for (auto idx : plan.batches[b]) {
        const auto& m = plan.examples[idx];
        if (hooks.forbidden_datasets.count(m.dataset_id)) {
          throw Error("batch " + std::to_string(step) + " contains example from held-out dataset '" +
                      m.dataset_id + "'");
        }
        q.push_back(m.query);
        ph.push_back(cur.encoder.premise_hypothesis_sequence(m.premise, m.hypothesis));
        keys.push_back(m.label_key);
      }
      auto lg = contrastive_loss_and_grad(cur.encoder, q, ph, keys, cfg.scl);
      if (!std::isfinite(lg.loss)) {
        throw Error("non-finite loss at batch " + std::to_string(step) + " (epoch " +
                    std::to_string(e) + ", batch " + std::to_string(b) + ")");
      }
      const double lr = lr_schedule(step, total_steps, cfg.learning_rate, cfg.warmup_ratio);
      apply_update(cur, lg.grad, lr, cfg.clip_norm);
      StepRecord rec{step, e, lg.loss, lr};
      result.curve.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
      epoch_loss += lg.loss;
      ++step;
    }
    result.epoch_mean_loss.push_back(
        plan.batches.empty() ? 0.0 : epoch_loss / static_cast<double>(plan.batches.size()));
  }
  cur.step += step;
  cur.encoder.set_mode(Mode::kEval);
  return result;
}

}  // namespace detail

// Every string the encoder will see during pretraining plus the label names
// of all manifest datasets, so target label names get their own embeddings.
inline Tokenizer pretraining_tokenizer(const std::vector<MetaExample>& meta,
                                       const DatasetManifest& manifest) {
  std::vector<std::string> corpus;
  corpus.reserve(meta.size() * 3);
  for (const auto& m : meta) {
    corpus.push_back(m.query);
    corpus.push_back(m.premise);
    corpus.push_back(m.hypothesis);
  }
  for (const auto& d : manifest.datasets) {
    for (const auto& l : d.labels.labels()) corpus.push_back(l);
    corpus.push_back(multiple_choice_query("x", d.labels));
  }
  return build_tokenizer(corpus);
}

inline Checkpoint initial_checkpoint(Tokenizer tok, const TrainConfig& cfg,
                                     std::string_view model = kModelContrastive) {
  Checkpoint ck(ToyEncoder(std::move(tok), cfg.shape, cfg.seed));
  ck.model = std::string(model);
  ck.config_hash = config_hash(cfg);
  return ck;
}

// Supervised contrastive pretraining over the meta-dataset.
inline TrainResult pretrain(Checkpoint init, const std::vector<MetaExample>& meta,
                            const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (meta.empty()) throw Error("pretraining needs a non-empty meta-dataset");
  if (init.model != kModelContrastive) throw Error("pretrain expects a contrastive checkpoint");
  return detail::contrastive_train(std::move(init), meta, cfg, cfg.batch_spec,
                                   cfg.epochs_pretrain, cfg.seed, hooks);
}

// Meta-examples for fine-tuning: query and premise are the two surface forms
// of each support sentence. Labels with a single example are duplicated so
// every anchor keeps a positive.
inline std::vector<MetaExample> support_meta(const SupportSet& support) {
  std::vector<MetaExample> meta;
  std::vector<std::size_t> per_label(support.labels.size(), 0);
  for (const auto& e : support.entries) {
    per_label[*support.labels.index_of(e.hypothesis)]++;
  }
  for (const auto& e : support.entries) {
    MetaExample m;
    m.query = multiple_choice_query(e.example.text, support.labels);
    m.premise = e.premise;
    m.hypothesis = e.hypothesis;
    m.label_key = e.hypothesis;
    m.dataset_id = e.example.dataset_id;
    const auto copies = per_label[*support.labels.index_of(e.hypothesis)] == 1 ? 2 : 1;
    for (int c = 0; c < copies; ++c) meta.push_back(m);
  }
  return meta;
}

inline void check_finetune_support(const SupportSet& support) {
  if (support.shots == 0 || support.entries.size() < 2) {
    throw Error("fine-tuning needs at least 2 support examples (k * |labels| >= 2), got " +
                std::to_string(support.entries.size()));
  }
}

// Continues contrastive training on the support set only. A single-label
// target has no negatives and is returned unchanged.
inline TrainResult finetune(const Checkpoint& ckpt, const SupportSet& support,
                            const TrainConfig& cfg) {
  cfg.validate();
  check_finetune_support(support);
  if (ckpt.model != kModelContrastive) throw Error("finetune expects a contrastive checkpoint");
  if (support.labels.size() < 2) return {ckpt, {}, {}};
  const auto meta = support_meta(support);
  std::size_t min_count = meta.size();
  for (const auto& l : support.labels.labels()) {
    std::size_t c = 0;
    for (const auto& m : meta) c += m.hypothesis == l;
    min_count = std::min(min_count, c);
  }
  BatchSpec spec;
  spec.labels_per_batch = std::min(cfg.batch_spec.labels_per_batch, support.labels.size());
  spec.instances_per_label = std::min(cfg.batch_spec.instances_per_label, min_count);
  return detail::contrastive_train(ckpt, meta, cfg, spec, cfg.epochs_finetune, support.seed, {});
}

}  // namespace entail
