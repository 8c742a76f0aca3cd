#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "entail/error.hpp"

namespace entail {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive-moment update with bias correction and weight decay applied
// directly to the parameters (decoupled from the gradient).
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw Error("AdamW: parameter count changed");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * params[i]);
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  void restore(std::uint64_t t, std::vector<double> m, std::vector<double> v) {
    if (m.size() != v.size()) throw Error("AdamW: moment size mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamWConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// Linear warmup from 0 to `peak` over warmup_ratio * total_steps, then linear
// decay to 0 at total_steps.
inline double lr_schedule(std::size_t step, std::size_t total_steps, double peak,
                          double warmup_ratio) {
  if (total_steps == 0 || step >= total_steps) return 0.0;
  const double s = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double warmup = warmup_ratio * total;
  if (s < warmup) return peak * s / warmup;
  return peak * (total - s) / (total - warmup);
}

// Scales grad in place so its L2 norm is at most max_norm. Returns the norm
// before clipping.
inline double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double n = std::sqrt(sq);
  if (n > max_norm && n > 0.0) {
    const double scale = max_norm / n;
    for (double& g : grad) g *= scale;
  }
  return n;
}

}  // namespace entail
