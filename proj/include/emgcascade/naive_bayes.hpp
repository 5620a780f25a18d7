#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "emgcascade/features.hpp"
#include "emgcascade/matrix.hpp"
#include "emgcascade/metrics.hpp"
#include "emgcascade/random.hpp"
#include "emgcascade/signal_model.hpp"

namespace emgcascade {

/// log(1e-300): densities are floored here before entering a log-support.
inline const double kLogDensityFloor = std::log(1e-300);

struct ClassPrior {
  std::vector<double> p;  // index j - 1 for class j
};

/// Empirical class frequencies. `class_count` of 0 means the largest label.
inline ClassPrior fit_priors(std::span<const int> labels, int class_count = 0) {
  if (labels.empty()) throw std::invalid_argument("fit_priors: no labels");
  int m = class_count;
  for (int y : labels) {
    if (y < 1) throw std::invalid_argument("fit_priors: labels must be >= 1");
    if (class_count == 0) m = std::max(m, y);
    else if (y > class_count) throw std::invalid_argument("fit_priors: label exceeds class count");
  }
  ClassPrior prior{std::vector<double>(static_cast<std::size_t>(m), 0.0)};
  for (int y : labels) prior.p[static_cast<std::size_t>(y - 1)] += 1.0;
  for (double& v : prior.p) v /= static_cast<double>(labels.size());
  return prior;
}

struct Gaussian1D {
  double mean = 0.0;
  double var = 1.0;

  double log_pdf(double x) const {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
  }
};

struct Mixture1D {
  std::vector<double> weights;
  std::vector<Gaussian1D> components;

  std::size_t size() const noexcept { return components.size(); }

  double log_pdf(double x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
      terms[k] = std::log(weights[k]) + components[k].log_pdf(x);
      best = std::max(best, terms[k]);
    }
    if (std::isinf(best)) return best;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
  }
};

/// Per-(class, feature) Gaussians, stored at [class_index * features + feature].
struct GaussianFeatureModel {
  std::size_t features = 0;
  std::vector<Gaussian1D> params;
  std::vector<double> var_floor;  // per feature
};

/// Per-(class, feature) 1-D mixtures with a single global component budget.
struct GmmFeatureModel {
  std::size_t features = 0;
  std::size_t components = 1;
  std::vector<Mixture1D> params;
  std::vector<double> var_floor;
};

enum class DensityEstimator { Gaussian, GaussianMixture };

inline std::string to_string(DensityEstimator e) {
  return e == DensityEstimator::Gaussian ? "NBG" : "NBGMT";
}

/// Naive Bayes over a channel-partitioned feature vector. The density table
/// is fitted once; the per-object channel weights only enter at scoring time.
struct DnbModel {
  ClassPrior priors;
  FeatureLayout layout;
  std::variant<GaussianFeatureModel, GmmFeatureModel> densities;

  int class_count() const noexcept { return static_cast<int>(priors.p.size()); }
  std::size_t feature_count() const noexcept { return layout.total(); }

  /// Number of elementary density records per class (sum of d_l).
  std::size_t density_count() const {
    return std::visit([](const auto& d) { return d.params.size(); }, densities) /
           static_cast<std::size_t>(class_count());
  }

  /// log P(x^(f) | class), floored at log(1e-300). `cls` is 0-based.
  double log_density(std::size_t cls, std::size_t f, double x) const {
    const double lp = std::visit(
        [&](const auto& d) { return d.params[cls * d.features + f].log_pdf(x); }, densities);
    return std::isnan(lp) ? kLogDensityFloor : std::max(lp, kLogDensityFloor);
  }
};

namespace detail {

inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

inline double variance_floor_for(std::span<const double> all_values) {
  return 1e-9 * (population_variance(all_values) + 1e-12);
}

inline std::vector<double> column(const Matrix& X, std::size_t c) {
  std::vector<double> v(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) v[r] = X(r, c);
  return v;
}

inline std::vector<std::vector<std::size_t>> rows_by_class(std::span<const int> y, int classes) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 1 || y[i] > classes) throw std::invalid_argument("label outside 1..M");
    out[static_cast<std::size_t>(y[i] - 1)].push_back(i);
  }
  return out;
}

}  // namespace detail

/// Per-(class, feature) sample mean and biased variance, floored at
/// 1e-9 * (global feature variance + 1e-12).
inline GaussianFeatureModel fit_gaussian(const Matrix& X, std::span<const int> y, int classes) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_gaussian: row/label mismatch");
  const auto groups = detail::rows_by_class(y, classes);
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (groups[j].size() < 2)
      throw std::invalid_argument("fit_gaussian: class " + std::to_string(j + 1) +
                                  " has fewer than 2 samples");
  GaussianFeatureModel m;
  m.features = X.cols();
  m.params.resize(groups.size() * X.cols());
  m.var_floor.resize(X.cols());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    const auto col = detail::column(X, f);
    m.var_floor[f] = detail::variance_floor_for(col);
    for (std::size_t j = 0; j < groups.size(); ++j) {
      double mean = 0.0;
      for (auto r : groups[j]) mean += col[r];
      mean /= static_cast<double>(groups[j].size());
      double var = 0.0;
      for (auto r : groups[j]) var += (col[r] - mean) * (col[r] - mean);
      var /= static_cast<double>(groups[j].size());
      m.params[j * X.cols() + f] = {mean, std::max(var, m.var_floor[f])};
    }
  }
  return m;
}

/// k-means++ seeding on scalar data. K is reduced to the number of distinct
/// values when there are fewer.
inline std::vector<double> kmeans_pp_init(std::span<const double> values, std::size_t k, Rng& rng) {
  if (values.empty()) throw std::invalid_argument("kmeans_pp_init: empty input");
  if (k == 0) throw std::invalid_argument("kmeans_pp_init: K must be positive");
  const std::set<double> distinct(values.begin(), values.end());
  k = std::min(k, distinct.size());
  std::vector<double> centers{values[rng.index(values.size())]};
  std::vector<double> d2(values.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) break;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = values.size() - 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    // Guard the rounding edge at the end of the cumulative sum.
    while (d2[pick] == 0.0 && pick > 0) --pick;
    centers.push_back(values[pick]);
  }
  return centers;
}

struct GmmFitOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;  // on the mean per-sample log-likelihood
};

/// EM for a 1-D Gaussian mixture seeded by k-means++. The optional trace
/// receives the mean log-likelihood at each E-step.
inline Mixture1D fit_gmm_feature(std::span<const double> values, std::size_t k, Rng& rng,
                                 double var_floor = -1.0, const GmmFitOptions& opt = {},
                                 std::vector<double>* trace = nullptr) {
  if (values.empty()) throw std::invalid_argument("fit_gmm_feature: empty input");
  if (var_floor < 0.0) var_floor = detail::variance_floor_for(values);
  const std::size_t n = values.size();
  const auto centers = kmeans_pp_init(values, std::min(k, n), rng);
  const std::size_t kk = centers.size();

  // Initial parameters from the hard nearest-center partition.
  Mixture1D mix;
  {
    std::vector<double> sum(kk, 0.0), sq(kk, 0.0), cnt(kk, 0.0);
    for (double v : values) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kk; ++c)
        if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
      sum[best] += v;
      cnt[best] += 1.0;
    }
    std::vector<double> mean(kk);
    for (std::size_t c = 0; c < kk; ++c) mean[c] = cnt[c] > 0 ? sum[c] / cnt[c] : centers[c];
    for (double v : values) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kk; ++c)
        if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
      sq[best] += (v - mean[best]) * (v - mean[best]);
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (cnt[c] == 0.0) continue;
      mix.weights.push_back(cnt[c] / static_cast<double>(n));
      mix.components.push_back({mean[c], std::max(sq[c] / cnt[c], var_floor)});
    }
  }

  std::vector<double> resp;
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    const std::size_t kc = mix.size();
    resp.assign(n * kc, 0.0);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kc; ++c) {
        resp[i * kc + c] = std::log(mix.weights[c]) + mix.components[c].log_pdf(values[i]);
        best = std::max(best, resp[i * kc + c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < kc; ++c) s += std::exp(resp[i * kc + c] - best);
      const double lse = best + std::log(s);
      ll += lse;
      for (std::size_t c = 0; c < kc; ++c) resp[i * kc + c] = std::exp(resp[i * kc + c] - lse);
    }
    ll /= static_cast<double>(n);
    if (trace) trace->push_back(ll);
    if (iter > 0 && ll - previous < opt.tolerance) break;
    previous = ll;

    Mixture1D next;
    for (std::size_t c = 0; c < kc; ++c) {
      double nk = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * kc + c];
        mean += resp[i * kc + c] * values[i];
      }
      if (nk < 1e-10 * static_cast<double>(n)) continue;  // component died out
      mean /= nk;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += resp[i * kc + c] * (values[i] - mean) * (values[i] - mean);
      next.weights.push_back(nk / static_cast<double>(n));
      next.components.push_back({mean, std::max(var / nk, var_floor)});
    }
    double wsum = 0.0;
    for (double w : next.weights) wsum += w;
    for (double& w : next.weights) w /= wsum;
    mix = std::move(next);
  }
  return mix;
}

inline GmmFeatureModel fit_gmm(const Matrix& X, std::span<const int> y, int classes,
                               std::size_t components, Rng& rng) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_gmm: row/label mismatch");
  const auto groups = detail::rows_by_class(y, classes);
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (groups[j].size() < 2)
      throw std::invalid_argument("fit_gmm: class " + std::to_string(j + 1) + " has fewer than 2 samples");
  GmmFeatureModel m;
  m.features = X.cols();
  m.components = components;
  m.params.resize(groups.size() * X.cols());
  m.var_floor.resize(X.cols());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    const auto col = detail::column(X, f);
    m.var_floor[f] = detail::variance_floor_for(col);
    for (std::size_t j = 0; j < groups.size(); ++j) {
      std::vector<double> vals;
      vals.reserve(groups[j].size());
      for (auto r : groups[j]) vals.push_back(col[r]);
      m.params[j * X.cols() + f] = fit_gmm_feature(vals, components, rng, m.var_floor[f]);
    }
  }
  return m;
}

struct EstimatorConfig {
  DensityEstimator kind = DensityEstimator::Gaussian;
  std::size_t components = 1;  // mixtures only
  std::uint64_t seed = 0;
};

/// One-shot training: priors plus every elementary density.
inline DnbModel fit_dnb(const Matrix& X, std::span<const int> y, const FeatureLayout& layout,
                        int classes, const EstimatorConfig& cfg = {}) {
  if (X.cols() != layout.total()) throw std::invalid_argument("fit_dnb: layout does not match features");
  DnbModel m;
  m.priors = fit_priors(y, classes);
  m.layout = layout;
  if (cfg.kind == DensityEstimator::Gaussian) {
    m.densities = fit_gaussian(X, y, classes);
  } else {
    Rng rng(cfg.seed, {0x6a11});
    m.densities = fit_gmm(X, y, classes, cfg.components, rng);
  }
  return m;
}

/// log d~_j = log p_j + sum_l r_l * sum_i log P(x_l^(i) | j), for j = 1..M.
inline std::vector<double> log_support(const DnbModel& m, const FullFeatureVector& x,
                                       std::span<const double> r) {
  if (r.size() != m.layout.channels())
    throw std::invalid_argument("log_support: contamination vector has " + std::to_string(r.size()) +
                                " entries, expected " + std::to_string(m.layout.channels()));
  if (x.values.size() != m.feature_count())
    throw std::invalid_argument("log_support: feature dimension mismatch");
  const auto classes = static_cast<std::size_t>(m.class_count());
  std::vector<double> out(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    double s = std::log(m.priors.p[j]);
    std::size_t f = 0;
    for (std::size_t l = 0; l < m.layout.channels(); ++l) {
      double block = 0.0;
      for (std::size_t i = 0; i < m.layout.dims[l]; ++i, ++f) block += m.log_density(j, f, x.values[f]);
      if (r[l] != 0.0) s += r[l] * block;
    }
    out[j] = s;
  }
  return out;
}

/// Normalized supports (softmax of the log-supports). When every
/// log-support is -inf the result is uniform and `degenerate` is set.
inline std::vector<double> supports(const DnbModel& m, const FullFeatureVector& x,
                                    std::span<const double> r, bool* degenerate = nullptr) {
  auto ls = log_support(m, x, r);
  const double best = *std::max_element(ls.begin(), ls.end());
  if (degenerate) *degenerate = std::isinf(best) && best < 0;
  if (std::isinf(best) && best < 0) {
    std::fill(ls.begin(), ls.end(), 1.0 / static_cast<double>(ls.size()));
    return ls;
  }
  double s = 0.0;
  for (double& v : ls) {
    v = std::exp(v - best);
    s += v;
  }
  for (double& v : ls) v /= s;
  return ls;
}

/// Index (1-based) of the largest value; ties go to the smallest index.
inline int argmax_label(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return static_cast<int>(best) + 1;
}

inline int predict(const DnbModel& m, const FullFeatureVector& x, std::span<const double> r) {
  return argmax_label(log_support(m, x, r));
}

inline std::vector<double> all_clean(std::size_t channels) { return std::vector<double>(channels, 1.0); }

/// The same model with channel `channel` removed from the layout and
/// densities.
inline DnbModel drop_channel(const DnbModel& m, std::size_t channel) {
  if (channel >= m.layout.channels()) throw std::out_of_range("drop_channel: no such channel");
  const std::size_t first = m.layout.offset(channel);
  const std::size_t width = m.layout.dims[channel];
  DnbModel out;
  out.priors = m.priors;
  out.layout = m.layout;
  out.layout.dims.erase(out.layout.dims.begin() + static_cast<std::ptrdiff_t>(channel));
  std::visit(
      [&](const auto& d) {
        auto copy = d;
        copy.features = d.features - width;
        copy.params.clear();
        copy.var_floor.clear();
        for (std::size_t f = 0; f < d.features; ++f)
          if (f < first || f >= first + width) copy.var_floor.push_back(d.var_floor[f]);
        for (std::size_t j = 0; j < static_cast<std::size_t>(m.class_count()); ++j)
          for (std::size_t f = 0; f < d.features; ++f)
            if (f < first || f >= first + width) copy.params.push_back(d.params[j * d.features + f]);
        out.densities = std::move(copy);
      },
      m.densities);
  return out;
}

inline FullFeatureVector as_feature_vector(std::span<const double> row, const FeatureLayout& layout) {
  return {std::vector<double>(row.begin(), row.end()), layout};
}

/// Balanced accuracy of a plain (unweighted) NB on a held-out set.
inline double plain_nb_bac(const DnbModel& m, const Matrix& X, std::span<const int> y) {
  ConfusionMatrix cm(m.class_count());
  const auto ones = all_clean(m.layout.channels());
  for (std::size_t r = 0; r < X.rows(); ++r) cm.add(y[r], predict(m, as_feature_vector(X.row(r), m.layout), ones));
  return balanced_accuracy(cm);
}

struct ComponentTuning {
  std::size_t components = 1;
  std::vector<std::size_t> grid;
  std::vector<double> mean_bac;
};

/// Picks one global mixture size by stratified 4-fold CV balanced accuracy
/// of the plain NB; ties go to the smaller K.
inline ComponentTuning tune_gmm_components(const Matrix& X, std::span<const int> y,
                                           const FeatureLayout& layout, int classes,
                                           std::vector<std::size_t> grid, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("tune_gmm_components: empty grid");
  std::sort(grid.begin(), grid.end());
  ComponentTuning out;
  out.grid = grid;
  if (grid.size() == 1) {
    out.components = grid.front();
    return out;
  }
  const std::vector<int> labels(y.begin(), y.end());
  const auto splits = stratified_split(labels, 4, 1, derive_seed(seed, {0x7c0}));
  double best = -1.0;
  for (auto k : grid) {
    double total = 0.0;
    for (const auto& s : splits) {
      std::vector<int> ytr, yte;
      for (auto i : s.train) ytr.push_back(labels[i]);
      for (auto i : s.test) yte.push_back(labels[i]);
      const auto m = fit_dnb(select_rows(X, s.train), ytr, layout, classes,
                             {DensityEstimator::GaussianMixture, k, derive_seed(seed, {k, s.fold})});
      total += plain_nb_bac(m, select_rows(X, s.test), yte);
    }
    const double mean = total / static_cast<double>(splits.size());
    out.mean_bac.push_back(mean);
    if (mean > best) {
      best = mean;
      out.components = k;
    }
  }
  return out;
}

}  // namespace emgcascade
