#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace emgcascade {

/// Average ranks (1-based) of `values` in ascending order; tied values share
/// the mean of the ranks they span.
inline std::vector<double> average_tied_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

struct SignedRanks {
  std::vector<double> ranks;  // of |d|, zero differences removed
  std::vector<bool> positive;
  double w_plus = 0.0;
  double w_minus = 0.0;

  std::size_t n() const noexcept { return ranks.size(); }
};

inline SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  std::vector<double> mag;
  SignedRanks s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    s.positive.push_back(d > 0.0);
  }
  s.ranks = average_tied_ranks(mag);
  for (std::size_t i = 0; i < s.ranks.size(); ++i) (s.positive[i] ? s.w_plus : s.w_minus) += s.ranks[i];
  return s;
}

/// Two-sided exact p-value by enumerating all 2^n sign patterns of the
/// (possibly tied) ranks.
inline double wilcoxon_exact_p(const SignedRanks& s) {
  const std::size_t n = s.n();
  if (n == 0) return 1.0;
  // Doubled average ranks are integers.
  std::vector<std::size_t> r2(n);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = static_cast<std::size_t>(std::llround(2.0 * s.ranks[i]));
    total += r2[i];
  }
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1.0;
  for (auto r : r2)
    for (std::size_t v = total; v >= r; --v) {
      count[v] += count[v - r];
      if (v == r) break;
    }
  const auto w = static_cast<std::size_t>(std::llround(2.0 * s.w_plus));
  const double patterns = std::ldexp(1.0, static_cast<int>(n));
  double lower = 0.0, upper = 0.0;
  for (std::size_t v = 0; v <= total; ++v) {
    if (v <= w) lower += count[v];
    if (v >= w) upper += count[v];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / patterns);
}

/// Two-sided normal approximation with tie and continuity corrections.
inline double wilcoxon_normal_p(const SignedRanks& s) {
  const double n = static_cast<double>(s.n());
  if (n == 0.0) return 1.0;
  const double mean = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  std::vector<double> sorted = s.ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(s.w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

inline constexpr std::size_t kWilcoxonExactLimit = 25;

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;  // after dropping zero differences
};

/// Paired two-sided Wilcoxon signed-rank test of a against b. Exact for
/// n <= 25 non-zero differences, normal approximation above.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  const auto s = signed_ranks(a, b);
  WilcoxonResult r{1.0, s.w_plus, s.w_minus, s.n()};
  if (s.n() == 0) return r;
  r.p_value = s.n() <= kWilcoxonExactLimit ? wilcoxon_exact_p(s) : wilcoxon_normal_p(s);
  return r;
}

/// Holm step-down adjustment; output is in the input order.
inline std::vector<double> holm_correction(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("holm_correction: no p-values");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, static_cast<double>(m - k) * p[order[k]]);
    adj[order[k]] = std::min(1.0, running);
  }
  return adj;
}

struct RankSummary {
  std::vector<double> mean_rank;  // higher is better, in [1, k]
  /// better_than[i] lists methods significantly better than method i.
  std::vector<std::vector<std::size_t>> significantly_better;
  /// Holm-adjusted pairwise p-values, k x k, 1 on the diagonal.
  std::vector<std::vector<double>> adjusted_p;
};

/// Ranks k methods over a set of cases (values[case][method], higher
/// better), averages the ranks, and runs all pairwise Wilcoxon tests with
/// Holm correction at level alpha.
inline RankSummary rank_methods(const std::vector<std::vector<double>>& values, double alpha = 0.05) {
  if (values.empty()) throw std::invalid_argument("rank_methods: no cases");
  const std::size_t k = values.front().size();
  if (k == 0) throw std::invalid_argument("rank_methods: no methods");
  RankSummary out;
  out.mean_rank.assign(k, 0.0);
  for (const auto& row : values) {
    if (row.size() != k) throw std::invalid_argument("rank_methods: every case needs every method");
    const auto r = average_tied_ranks(row);
    for (std::size_t m = 0; m < k; ++m) out.mean_rank[m] += r[m];
  }
  for (double& r : out.mean_rank) r /= static_cast<double>(values.size());

  out.significantly_better.assign(k, {});
  out.adjusted_p.assign(k, std::vector<double>(k, 1.0));
  if (k < 2) return out;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> raw;
  std::vector<bool> second_better;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> a, b;
      for (const auto& row : values) {
        a.push_back(row[j]);
        b.push_back(row[i]);
      }
      const auto w = wilcoxon_signed_rank(a, b);
      pairs.emplace_back(i, j);
      raw.push_back(w.p_value);
      second_better.push_back(w.w_plus > w.w_minus);
    }
  const auto adj = holm_correction(raw);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto [i, j] = pairs[t];
    out.adjusted_p[i][j] = out.adjusted_p[j][i] = adj[t];
    if (adj[t] < alpha) {
      if (second_better[t]) out.significantly_better[i].push_back(j);
      else out.significantly_better[j].push_back(i);
    }
  }
  for (auto& v : out.significantly_better) std::sort(v.begin(), v.end());
  return out;
}

}  // namespace emgcascade
