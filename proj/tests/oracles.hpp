#pragma once

// Independent reference implementations used only by tests. They transcribe
// the definitions directly (no log-sum-exp, no shared helpers with the
// library) so agreement is meaningful.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace entail::oracle {

using Grid = std::vector<std::vector<double>>;

// Literal double loop over the supervised contrastive loss definition.
inline double scl_loss(const Grid& S, const std::vector<int>& y, double tau,
                       bool exclude_self_in_count = false) {
  const std::size_t N = y.size();
  double L = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double P = 0.0;
    for (std::size_t p = 0; p < N; ++p) P += (y[p] == y[i]) ? 1.0 : 0.0;
    if (exclude_self_in_count) P -= 1.0;
    double denom = 0.0;
    for (std::size_t a = 0; a < N; ++a) denom += (i != a) ? std::exp(S[i][a] / tau) : 0.0;
    double inner = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
      if (y[i] == y[p] && i != p) inner += std::log(std::exp(S[i][p] / tau) / denom);
    }
    if (P > 0) L += -inner / P;
  }
  return L;
}

// Central difference of f at x along coordinate `idx`.
template <typename F, typename X>
double central_difference(F&& f, X x, std::size_t idx, double h) {
  const double orig = x[idx];
  x[idx] = orig + h;
  const double up = f(x);
  x[idx] = orig - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return dot / std::sqrt(na * nb);
}

// Exhaustive argmax over every (query, candidate) similarity; first label
// index wins ties. candidates[j] votes for label_of[j].
inline std::size_t exhaustive_argmax(const std::vector<double>& query,
                                     const std::vector<std::vector<double>>& candidates,
                                     const std::vector<std::size_t>& label_of,
                                     std::size_t n_labels) {
  std::size_t best_label = 0;
  double best = -2.0;
  for (std::size_t l = 0; l < n_labels; ++l) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (label_of[j] != l) continue;
      const double s = cosine(query, candidates[j]);
      if (s > best) {
        best = s;
        best_label = l;
      }
    }
  }
  return best_label;
}

// Relative error with zero treated as exact agreement.
inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace entail::oracle
