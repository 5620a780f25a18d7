#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace emgcascade {

/// Logistic map of raw detector scores onto (0, 1): sigma(a * s + b).
struct Calibrator {
  double a = 1.0;
  double b = 0.0;

  double operator()(double score) const {
    const double t = a * score + b;
    // Evaluate on the side that cannot overflow.
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }
};

/// Fits the calibrator by Newton's method with backtracking on the
/// cross-entropy between sigma(a s + b) and Platt's smoothed targets
/// ((N+ + 1) / (N+ + 2) for positives, 1 / (N- + 2) for negatives). The
/// smoothing keeps the optimum finite on separable score sets.
inline Calibrator fit_calibrator(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("fit_calibrator: size mismatch");
  double n_pos = 0.0, n_neg = 0.0;
  for (int y : labels) (y > 0 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0)
    throw std::invalid_argument("fit_calibrator: both classes must be present");

  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> target(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) target[i] = labels[i] > 0 ? hi : lo;

  // Work in Platt's parameterization P = 1 / (1 + exp(A s + B)).
  double A = 0.0;
  double B = std::log((n_neg + 1.0) / (n_pos + 1.0));
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * a + b;
      f += z >= 0.0 ? target[i] * z + std::log1p(std::exp(-z))
                    : (target[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(A, B);
  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * A + B;
      double p, q;
      if (z >= 0.0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = target[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= kMinStep) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {-A, -B};
}

}  // namespace emgcascade
