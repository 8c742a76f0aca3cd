#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "entail/checkpoint.hpp"
#include "entail/config.hpp"
#include "entail/optimizer.hpp"
#include "entail/predictor.hpp"
#include "entail/training.hpp"

// Entailment-as-binary-classification baseline: every (query, label) pair is
// one example with target 1 iff the label is gold. The pooled encoder output
// of "query [SEP] label" feeds a logistic head.

namespace entail {

struct EflPair {
  std::string query;
  std::string label;
  double target = 0.0;
};

inline std::vector<EflPair> efl_pairs(const std::string& query, const LabelSet& labels,
                                      const std::string& gold) {
  std::vector<EflPair> out;
  for (const auto& l : labels.labels()) out.push_back({query, l, l == gold ? 1.0 : 0.0});
  return out;
}

inline Checkpoint initial_efl_checkpoint(Tokenizer tok, const TrainConfig& cfg) {
  Checkpoint ck = initial_checkpoint(std::move(tok), cfg, kModelEfl);
  const std::size_t d = cfg.shape.out_dim;
  ck.head.assign(d + 1, 0.0);
  Rng rng(cfg.seed ^ 0x5eedULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < d; ++i) ck.head[i] = u(rng);
  return ck;
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double efl_logit(const Checkpoint& ck, const Vec& x) {
  const std::size_t d = x.size();
  double z = ck.head[d];
  for (std::size_t k = 0; k < d; ++k) z += ck.head[k] * x[k];
  return z;
}

inline double efl_probability(const Checkpoint& ck, std::string_view query,
                              std::string_view label) {
  const auto x = ck.encoder.encode(ck.encoder.premise_hypothesis_sequence(query, label));
  return sigmoid(efl_logit(ck, x));
}

// Mean binary cross-entropy over the batch and its gradient laid out as
// [encoder params | head].
inline LossAndGrad efl_loss_and_grad(const Checkpoint& ck, const std::vector<EflPair>& batch) {
  const auto& enc = ck.encoder;
  const std::size_t d = enc.dim();
  LossAndGrad out;
  out.grad.assign(enc.param_count() + ck.head.size(), 0.0);
  std::span<double> genc(out.grad.data(), enc.param_count());
  double* ghead = out.grad.data() + enc.param_count();
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : batch) {
    const auto f = enc.forward(enc.premise_hypothesis_sequence(p.query, p.label));
    const double z = efl_logit(ck, f.out);
    // log(1 + e^z) - t z, stable for either sign of z
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += (softplus - p.target * z) * inv;
    const double gz = (sigmoid(z) - p.target) * inv;
    Vec gx(d);
    for (std::size_t k = 0; k < d; ++k) {
      ghead[k] += gz * f.out[k];
      gx[k] = gz * ck.head[k];
    }
    ghead[d] += gz;
    enc.backward(f, gx, genc);
  }
  return out;
}

namespace detail {

inline TrainResult efl_train(Checkpoint ck, const std::vector<EflPair>& pairs,
                             const TrainConfig& cfg, std::size_t epochs, std::uint64_t seed) {
  if (pairs.empty()) throw Error("EFL training needs at least one pair");
  const std::size_t bs = cfg.batch_spec.batch_size();
  const std::size_t per_epoch = (pairs.size() + bs - 1) / bs;
  const std::size_t total = per_epoch * epochs;
  ck.optimizer =
      AdamW(ck.encoder.param_count() + ck.head.size(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  ck.encoder.set_mode(Mode::kTrain);
  TrainResult result{std::move(ck), {}, {}};
  Checkpoint& cur = result.checkpoint;
  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::vector<EflPair> batch;
      for (std::size_t i = b * bs; i < std::min(pairs.size(), (b + 1) * bs); ++i) {
        batch.push_back(pairs[order[i]]);
      }
      auto lg = efl_loss_and_grad(cur, batch);
      if (!std::isfinite(lg.loss)) {
        throw Error("non-finite EFL loss at batch " + std::to_string(step));
      }
      const double lr = lr_schedule(step, total, cfg.learning_rate, cfg.warmup_ratio);
      apply_update(cur, lg.grad, lr, cfg.clip_norm);
      result.curve.push_back({step, e, lg.loss, lr});
      epoch_loss += lg.loss;
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(per_epoch));
  }
  cur.step += step;
  cur.encoder.set_mode(Mode::kEval);
  return result;
}

}  // namespace detail

// Pretrains the baseline on every (query, label) pair of the meta-dataset.
inline TrainResult train_efl_baseline(Checkpoint init, const std::vector<MetaExample>& meta,
                                      const DatasetManifest& manifest, const TrainConfig& cfg) {
  cfg.validate();
  if (init.model != kModelEfl) throw Error("train_efl_baseline expects an EFL checkpoint");
  std::vector<EflPair> pairs;
  for (const auto& m : meta) {
    const auto& labels = manifest.find(m.dataset_id).labels;
    auto p = efl_pairs(m.query, labels, m.hypothesis);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  return detail::efl_train(std::move(init), pairs, cfg, cfg.epochs_pretrain, cfg.seed);
}

inline TrainResult finetune_efl(const Checkpoint& ckpt, const SupportSet& support,
                                const TrainConfig& cfg) {
  cfg.validate();
  check_finetune_support(support);
  std::vector<EflPair> pairs;
  for (const auto& e : support.entries) {
    auto p = efl_pairs(multiple_choice_query(e.example.text, support.labels), support.labels,
                       e.hypothesis);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  return detail::efl_train(ckpt, pairs, cfg, cfg.epochs_finetune, support.seed);
}

// Label with the highest entailment probability; ties go to the lowest index.
inline Prediction efl_predict(const Checkpoint& ck, std::string_view text,
                              const LabelSet& labels) {
  const auto query = multiple_choice_query(text, labels);
  std::vector<double> scores;
  for (const auto& l : labels.labels()) scores.push_back(efl_probability(ck, query, l));
  return select_label(scores, labels);
}

}  // namespace entail
