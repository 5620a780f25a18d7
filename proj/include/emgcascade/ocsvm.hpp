#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "emgcascade/matrix.hpp"

namespace emgcascade {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

/// One-class SVM with an RBF kernel:
///   f(x) = sum_i alpha_i exp(-gamma |x - sv_i|^2) - rho,
/// with alphas summing to 1 and bounded by 1 / (nu * n_train).
struct OcsvmModel {
  Matrix support_vectors;
  std::vector<double> alphas;
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.5;
  std::size_t training_size = 0;
  std::size_t iterations = 0;

  std::size_t dimension() const noexcept { return support_vectors.cols(); }

  double decision(std::span<const double> x) const {
    if (x.size() != dimension())
      throw std::invalid_argument("OcsvmModel: feature dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i)
      s += alphas[i] * rbf_kernel(support_vectors.row(i), x, gamma);
    return s - rho;
  }
};

/// Scale heuristic 1 / (d * var(X)) over all entries; 1 / d when the
/// variance is below 1e-12.
inline double default_gamma(const Matrix& X) {
  const std::size_t d = X.cols();
  if (d == 0) throw std::invalid_argument("default_gamma: zero-width matrix");
  const auto& v = X.data();
  if (v.empty()) return 1.0 / static_cast<double>(d);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var < 1e-12) return 1.0 / static_cast<double>(d);
  return 1.0 / (static_cast<double>(d) * var);
}

struct OcsvmOptions {
  double tolerance = 1e-4;
  std::size_t max_iterations = 1'000'000;
};

/// Solves the one-class dual
///   min 1/2 a'Qa  s.t.  0 <= a_i <= 1/(nu n),  sum a = 1
/// by SMO with second-order working-set selection. Internally the problem is
/// scaled to 0 <= a_i <= 1, sum a = nu n; the result is rescaled. The
/// kernel matrix is held in memory.
inline OcsvmModel train_ocsvm(const Matrix& X, double nu, double gamma,
                              const OcsvmOptions& opt = {}) {
  const std::size_t n = X.rows();
  if (n == 0) throw std::invalid_argument("train_ocsvm: empty training set");
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("train_ocsvm: nu must be in (0, 1]");
  if (!(gamma > 0.0)) throw std::invalid_argument("train_ocsvm: gamma must be positive");

  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) Q[i * n + j] = Q[j * n + i] = rbf_kernel(X.row(i), X.row(j), gamma);
  }
  auto q = [&](std::size_t i, std::size_t j) { return Q[i * n + j]; };

  constexpr double C = 1.0;
  constexpr double kTau = 1e-12;
  const double total = nu * static_cast<double>(n);
  std::vector<double> alpha(n, 0.0);
  const auto full = static_cast<std::size_t>(std::floor(total));
  for (std::size_t i = 0; i < std::min(full, n); ++i) alpha[i] = C;
  if (full < n) alpha[full] = total - static_cast<double>(full);

  std::vector<double> G(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (alpha[j] != 0.0)
      for (std::size_t i = 0; i < n; ++i) G[i] += q(i, j) * alpha[j];

  std::size_t iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    // i: most violating index that can still increase.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i_sel = n;
    for (std::size_t t = 0; t < n; ++t)
      if (alpha[t] < C && -G[t] >= gmax) {
        gmax = -G[t];
        i_sel = t;
      }
    // j: second-order selection among indices that can decrease.
    double gmax2 = -std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::size_t j_sel = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!(alpha[t] > 0.0)) continue;
      gmax2 = std::max(gmax2, G[t]);
      if (i_sel == n) continue;
      const double grad_diff = gmax + G[t];
      if (grad_diff > 0.0) {
        double quad = q(i_sel, i_sel) + q(t, t) - 2.0 * q(i_sel, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j_sel = t;
        }
      }
    }
    if (gmax + gmax2 < opt.tolerance || i_sel == n || j_sel == n) break;

    const std::size_t i = i_sel, j = j_sel;
    const double old_i = alpha[i], old_j = alpha[j];
    double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
    if (quad <= 0.0) quad = kTau;
    const double delta = (G[i] - G[j]) / quad;
    const double sum = alpha[i] + alpha[j];
    alpha[i] -= delta;
    alpha[j] += delta;
    if (sum > C) {
      if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
    } else {
      if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
    }
    if (sum > C) {
      if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
    } else {
      if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t k = 0; k < n; ++k) G[k] += q(k, i) * di + q(k, j) * dj;
  }

  // rho from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] >= C) lb = std::max(lb, G[t]);
    else if (alpha[t] <= 0.0) ub = std::min(ub, G[t]);
    else { free_sum += G[t]; ++free_count; }
  }
  double rho;
  if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
  else if (std::isinf(ub)) rho = lb;
  else if (std::isinf(lb)) rho = ub;
  else rho = 0.5 * (ub + lb);

  OcsvmModel model;
  model.gamma = gamma;
  model.nu = nu;
  model.training_size = n;
  model.iterations = iter;
  model.rho = rho / total;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.append_row(X.row(t));
      model.alphas.push_back(alpha[t] / total);
    }
  }
  return model;
}

}  // namespace emgcascade
