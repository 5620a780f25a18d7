#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "emgcascade/calibration.hpp"
#include "emgcascade/features.hpp"
#include "emgcascade/matrix.hpp"
#include "emgcascade/ocsvm.hpp"
#include "emgcascade/random.hpp"

namespace emgcascade {

using Bounds = std::vector<std::pair<double, double>>;

/// Per-feature [min, max] of X, widened on each side by `margin` times the
/// range.
inline Bounds feature_bounds(const Matrix& X, double margin = 0.1) {
  if (X.rows() == 0) throw std::invalid_argument("feature_bounds: empty matrix");
  Bounds b(X.cols(), {0.0, 0.0});
  for (std::size_t c = 0; c < X.cols(); ++c) {
    double lo = X(0, c), hi = X(0, c);
    for (std::size_t r = 1; r < X.rows(); ++r) {
      lo = std::min(lo, X(r, c));
      hi = std::max(hi, X(r, c));
    }
    const double pad = margin * (hi - lo);
    b[c] = {lo - pad, hi + pad};
  }
  return b;
}

inline Matrix generate_uniform_outliers(const Bounds& bounds, std::size_t count, Rng& rng) {
  Matrix out(count, bounds.size());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < bounds.size(); ++c) {
      const auto [lo, hi] = bounds[c];
      if (lo > hi) throw std::invalid_argument("generate_uniform_outliers: lo > hi");
      out(r, c) = lo == hi ? lo : rng.uniform(lo, hi);
    }
  return out;
}

/// Balanced accuracy of a detector on targets (should score >= 0) and
/// outliers (should score < 0).
inline double detector_bac(const OcsvmModel& m, const Matrix& targets, const Matrix& outliers) {
  std::size_t tp = 0, tn = 0;
  for (std::size_t r = 0; r < targets.rows(); ++r) tp += m.decision(targets.row(r)) >= 0.0;
  for (std::size_t r = 0; r < outliers.rows(); ++r) tn += m.decision(outliers.row(r)) < 0.0;
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(targets.rows()) +
                static_cast<double>(tn) / static_cast<double>(outliers.rows()));
}

struct NuTuning {
  double nu = 0.0;
  OcsvmModel model;
  std::vector<double> grid;      // ascending
  std::vector<double> mean_bac;  // per grid value
  // Out-of-fold scores at the chosen nu: validation targets (label 1) and
  // artificial outliers (label 0).
  std::vector<double> calibration_scores;
  std::vector<int> calibration_labels;
};

inline constexpr std::size_t kTuningFolds = 4;

/// Selects nu by 4-fold CV. Each validation fold is paired with as many
/// uniform outliers drawn from the training fold's widened bounding box; the
/// criterion is balanced accuracy, ties going to the smaller nu. The
/// returned model is retrained on all of X.
inline NuTuning tune_nu(const Matrix& X, std::vector<double> nu_grid, Rng& rng,
                        const OcsvmOptions& opt = {}) {
  if (nu_grid.empty()) throw std::invalid_argument("tune_nu: empty nu grid");
  if (X.rows() < 2 * kTuningFolds)
    throw std::invalid_argument("tune_nu: need at least 8 rows, got " + std::to_string(X.rows()));
  std::sort(nu_grid.begin(), nu_grid.end());

  std::vector<std::size_t> order(X.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  struct Fold {
    Matrix train, valid, outliers;
    double gamma;
  };
  std::vector<Fold> folds;
  for (std::size_t f = 0; f < kTuningFolds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t k = 0; k < order.size(); ++k) (k % kTuningFolds == f ? va : tr).push_back(order[k]);
    Fold fold{select_rows(X, tr), select_rows(X, va), {}, 0.0};
    fold.gamma = default_gamma(fold.train);
    fold.outliers = generate_uniform_outliers(feature_bounds(fold.train), va.size(), rng);
    folds.push_back(std::move(fold));
  }

  NuTuning result;
  result.grid = nu_grid;
  double best = -1.0;
  for (double nu : nu_grid) {
    double total = 0.0;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& fold : folds) {
      const auto m = train_ocsvm(fold.train, nu, fold.gamma, opt);
      total += detector_bac(m, fold.valid, fold.outliers);
      for (std::size_t r = 0; r < fold.valid.rows(); ++r) {
        scores.push_back(m.decision(fold.valid.row(r)));
        labels.push_back(1);
      }
      for (std::size_t r = 0; r < fold.outliers.rows(); ++r) {
        scores.push_back(m.decision(fold.outliers.row(r)));
        labels.push_back(0);
      }
    }
    const double mean = total / static_cast<double>(kTuningFolds);
    result.mean_bac.push_back(mean);
    if (mean > best) {
      best = mean;
      result.nu = nu;
      result.calibration_scores = std::move(scores);
      result.calibration_labels = std::move(labels);
    }
  }
  result.model = train_ocsvm(X, result.nu, default_gamma(X), opt);
  return result;
}

enum class DecisionMode { Crisp, Soft };

struct ChannelDetector {
  std::size_t channel = 0;
  OcsvmModel model;
  Calibrator calibrator;
};

/// One detector per channel. r_l = 1 means channel l looks clean.
struct OccEnsemble {
  std::vector<ChannelDetector> detectors;
  FeatureLayout layout;
  DecisionMode mode = DecisionMode::Soft;

  OccEnsemble with_mode(DecisionMode m) const {
    OccEnsemble e = *this;
    e.mode = m;
    return e;
  }
};

struct OccOptions {
  std::vector<double> nu_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  OcsvmOptions solver;
};

/// Trains the per-channel detectors on clean feature rows of X (layout gives
/// the channel blocks). Each channel uses its own generator stream.
inline OccEnsemble train_occ_ensemble(const Matrix& X, const FeatureLayout& layout,
                                      const OccOptions& opt, std::uint64_t seed,
                                      DecisionMode mode = DecisionMode::Soft) {
  if (X.cols() != layout.total()) throw std::invalid_argument("train_occ_ensemble: layout mismatch");
  OccEnsemble e;
  e.layout = layout;
  e.mode = mode;
  for (std::size_t l = 0; l < layout.channels(); ++l) {
    Rng rng(seed, {0x0cc, l});
    const Matrix Xl = column_block(X, layout.offset(l), layout.dims[l]);
    auto tuned = tune_nu(Xl, opt.nu_grid, rng, opt.solver);
    Calibrator cal = fit_calibrator(tuned.calibration_scores, tuned.calibration_labels);
    e.detectors.push_back({l, std::move(tuned.model), cal});
  }
  return e;
}

inline std::vector<double> ensemble_predict(const OccEnsemble& e, const FullFeatureVector& x,
                                            DecisionMode mode) {
  if (x.layout != e.layout) throw std::invalid_argument("ensemble_predict: feature layout mismatch");
  std::vector<double> r(e.detectors.size());
  for (std::size_t l = 0; l < e.detectors.size(); ++l) {
    const auto& det = e.detectors[l];
    const double f = det.model.decision(x.channel(det.channel));
    r[l] = mode == DecisionMode::Crisp ? (f >= 0.0 ? 1.0 : 0.0) : det.calibrator(f);
  }
  return r;
}

inline std::vector<double> ensemble_predict(const OccEnsemble& e, const FullFeatureVector& x) {
  return ensemble_predict(e, x, e.mode);
}

}  // namespace emgcascade
