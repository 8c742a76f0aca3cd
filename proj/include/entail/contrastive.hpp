#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entail/error.hpp"

namespace entail {

// Row-major dense matrix. Rows of a similarity matrix index queries, columns
// index premise-hypothesis encodings.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("cosine similarity: dimension mismatch " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (!std::isfinite(dot) || !std::isfinite(na) || !std::isfinite(nb)) {
    throw Error("cosine similarity: non-finite embedding");
  }
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity: zero-norm embedding");
  const double s = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(s, -1.0, 1.0);
}

// d cos(a, b) / da and d cos(a, b) / db.
inline std::pair<std::vector<double>, std::vector<double>> cosine_gradient(
    std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity: zero-norm embedding");
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  const double s = dot / (na * nb);
  std::vector<double> ga(a.size());
  std::vector<double> gb(b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ga[k] = b[k] / (na * nb) - s * a[k] / (na * na);
    gb[k] = a[k] / (na * nb) - s * b[k] / (nb * nb);
  }
  return {std::move(ga), std::move(gb)};
}

struct PositiveMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> s;  // n x n, s[i*n+j] = 1 iff key_i == key_j

  bool operator()(std::size_t i, std::size_t j) const { return s[i * n + j] != 0; }
};

template <typename Key>
PositiveMask build_positive_mask(const std::vector<Key>& keys) {
  if (keys.size() < 2) throw Error("positive mask needs at least 2 entries");
  PositiveMask m;
  m.n = keys.size();
  m.s.assign(m.n * m.n, 0);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) m.s[i * m.n + j] = keys[i] == keys[j] ? 1 : 0;
  }
  return m;
}

// How |P(i)| counts positives. kLiteral counts every p with y_p == y_i,
// including p == i; kExcludeSelf counts only p != i.
enum class PCountConvention { kLiteral, kExcludeSelf };

struct SCLParams {
  double temperature = 0.07;
  PCountConvention p_count = PCountConvention::kLiteral;
  // When false, an anchor without off-diagonal positives contributes an empty
  // sum (zero) instead of being rejected.
  bool require_positive_per_anchor = true;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error("temperature must be a positive finite number");
    }
  }
};

namespace detail {

struct AnchorRow {
  double log_denominator;  // log sum_{a != i} exp(S_ia / tau)
  std::size_t positives;   // off-diagonal positives
  double normalizer;       // |P(i)| under the configured convention
};

inline AnchorRow anchor_row(const Matrix& S, const PositiveMask& mask, std::size_t i,
                            const SCLParams& params) {
  const std::size_t n = S.cols;
  double mx = -std::numeric_limits<double>::infinity();
  std::size_t positives = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a == i) continue;
    mx = std::max(mx, S(i, a) / params.temperature);
    if (mask(i, a)) ++positives;
  }
  if (positives == 0 && params.require_positive_per_anchor) {
    throw Error("anchor " + std::to_string(i) + " has no positive besides itself");
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a != i) sum += std::exp(S(i, a) / params.temperature - mx);
  }
  double normalizer = static_cast<double>(positives);
  if (params.p_count == PCountConvention::kLiteral && mask(i, i)) normalizer += 1.0;
  return {mx + std::log(sum), positives, std::max(normalizer, 1.0)};
}

inline void check_inputs(const Matrix& S, const PositiveMask& mask, const SCLParams& params) {
  params.validate();
  if (S.rows != S.cols || S.rows != mask.n) {
    throw Error("similarity matrix and mask must both be N x N");
  }
  if (S.rows < 2) throw Error("contrastive loss needs a batch of at least 2");
}

}  // namespace detail

// Supervised contrastive loss over a query x premise-hypothesis similarity
// matrix, summed over anchors:
//   L = -sum_i 1/|P(i)| sum_{p != i, y_p = y_i} log( exp(S_ip/t) / sum_{a != i} exp(S_ia/t) )
inline double scl_loss(const Matrix& S, const PositiveMask& mask, const SCLParams& params) {
  detail::check_inputs(S, mask, params);
  const std::size_t n = S.rows;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = detail::anchor_row(S, mask, i, params);
    if (row.positives == 0) continue;
    double anchor = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || !mask(i, p)) continue;
      anchor += row.log_denominator - S(i, p) / params.temperature;
    }
    total += anchor / row.normalizer;
  }
  return total;
}

// dL/dS. For a != i: (n_i * softmax_ia - s_ia) / (tau |P(i)|); the diagonal
// never enters the loss and gets zero.
inline Matrix scl_loss_gradient(const Matrix& S, const PositiveMask& mask,
                                const SCLParams& params) {
  detail::check_inputs(S, mask, params);
  const std::size_t n = S.rows;
  Matrix G(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = detail::anchor_row(S, mask, i, params);
    if (row.positives == 0) continue;
    const double scale = 1.0 / (params.temperature * row.normalizer);
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const double prob = std::exp(S(i, a) / params.temperature - row.log_denominator);
      G(i, a) = scale * (static_cast<double>(row.positives) * prob - (mask(i, a) ? 1.0 : 0.0));
    }
  }
  return G;
}

}  // namespace entail
