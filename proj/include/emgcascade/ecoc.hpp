#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "emgcascade/naive_bayes.hpp"

namespace emgcascade {

/// Method B: plain naive Bayes on every channel.
inline int predict_B(const DnbModel& m, const FullFeatureVector& x) {
  return predict(m, x, all_clean(m.layout.channels()));
}

/// Binary code matrix: one row per class, one column per binary learner.
using Codebook = std::vector<std::vector<int>>;

inline std::size_t code_length(int classes, double code_size) {
  return static_cast<std::size_t>(std::ceil(code_size * static_cast<double>(classes) - 1e-9));
}

inline bool codebook_valid(const Codebook& cb) {
  if (cb.empty()) return false;
  const std::set<std::vector<int>> rows(cb.begin(), cb.end());
  if (rows.size() != cb.size()) return false;
  for (std::size_t c = 0; c < cb.front().size(); ++c) {
    bool any0 = false, any1 = false;
    for (const auto& row : cb) (row[c] ? any1 : any0) = true;
    if (!(any0 && any1)) return false;
  }
  return true;
}

/// Dense random {0,1} codebook of size M x ceil(code_size * M), resampled
/// until rows are distinct and no column is constant.
inline Codebook build_codebook(int classes, double code_size, Rng& rng) {
  if (classes < 2) throw std::invalid_argument("build_codebook: need at least 2 classes");
  const std::size_t len = code_length(classes, code_size);
  if (len == 0) throw std::invalid_argument("build_codebook: code_size too small");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Codebook cb(static_cast<std::size_t>(classes), std::vector<int>(len));
    for (auto& row : cb)
      for (auto& bit : row) bit = static_cast<int>(rng.next() >> 63);
    if (codebook_valid(cb)) return cb;
  }
  throw std::runtime_error("build_codebook: no valid codebook after 1000 attempts");
}

struct EcocModel {
  Codebook codebook;                // full M x code_length matrix
  std::vector<std::size_t> columns;  // columns that got a learner
  std::vector<DnbModel> learners;    // class 2 of each learner <=> bit 1
  double code_size = 0.0;
  std::size_t dropped_columns = 0;
};

/// Class (1-based) whose codeword restricted to `columns` is nearest in
/// Euclidean distance to the per-column bit-1 probabilities. Ties go to the
/// smallest class.
inline int ecoc_decode(const Codebook& codebook, const std::vector<std::size_t>& columns,
                       std::span<const double> bit_probabilities) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < codebook.size(); ++j) {
    double d = 0.0;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const double e = bit_probabilities[k] - codebook[j][columns[k]];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return static_cast<int>(best) + 1;
}

inline EcocModel train_ecoc_with_codebook(const Matrix& X, std::span<const int> y,
                                          const FeatureLayout& layout, Codebook codebook,
                                          const EstimatorConfig& est = {}) {
  EcocModel m;
  m.codebook = std::move(codebook);
  for (std::size_t c = 0; c < m.codebook.front().size(); ++c) {
    std::vector<int> binary(y.size());
    std::size_t ones = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      binary[i] = m.codebook[static_cast<std::size_t>(y[i] - 1)][c] ? 2 : 1;
      ones += binary[i] == 2;
    }
    if (ones < 2 || y.size() - ones < 2) {
      ++m.dropped_columns;
      continue;
    }
    auto cfg = est;
    cfg.seed = derive_seed(est.seed, {0xec0c, c});
    m.learners.push_back(fit_dnb(X, binary, layout, 2, cfg));
    m.columns.push_back(c);
  }
  if (m.learners.empty()) throw std::runtime_error("train_ecoc: every codebook column was degenerate");
  return m;
}

inline EcocModel train_ecoc(const Matrix& X, std::span<const int> y, const FeatureLayout& layout,
                            int classes, double code_size, Rng& rng, const EstimatorConfig& est = {}) {
  auto model = train_ecoc_with_codebook(X, y, layout, build_codebook(classes, code_size, rng), est);
  model.code_size = code_size;
  return model;
}

inline std::vector<double> ecoc_bit_probabilities(const EcocModel& m, const FullFeatureVector& x) {
  std::vector<double> p;
  p.reserve(m.learners.size());
  for (const auto& learner : m.learners)
    p.push_back(supports(learner, x, all_clean(learner.layout.channels()))[1]);
  return p;
}

inline int predict_ecoc(const EcocModel& m, const FullFeatureVector& x) {
  return ecoc_decode(m.codebook, m.columns, ecoc_bit_probabilities(m, x));
}

struct EcocTuning {
  EcocModel model;
  std::vector<double> grid;
  std::vector<double> mean_bac;
};

/// Grid search over code_size by stratified 4-fold CV balanced accuracy
/// (ties to the smaller value), then a final fit on all rows.
inline EcocTuning tune_ecoc(const Matrix& X, std::span<const int> y, const FeatureLayout& layout,
                            int classes, std::vector<double> grid, std::uint64_t seed,
                            const EstimatorConfig& est = {}) {
  if (grid.empty()) throw std::invalid_argument("tune_ecoc: empty code_size grid");
  std::sort(grid.begin(), grid.end());
  EcocTuning out;
  out.grid = grid;
  double chosen = grid.front();
  if (grid.size() > 1) {
    const std::vector<int> labels(y.begin(), y.end());
    const auto splits = stratified_split(labels, 4, 1, derive_seed(seed, {0xec1}));
    double best = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double total = 0.0;
      for (const auto& s : splits) {
        std::vector<int> ytr, yte;
        for (auto i : s.train) ytr.push_back(labels[i]);
        for (auto i : s.test) yte.push_back(labels[i]);
        Rng rng(seed, {0xec2, g, s.fold});
        const auto m = train_ecoc(select_rows(X, s.train), ytr, layout, classes, grid[g], rng, est);
        const Matrix Xte = select_rows(X, s.test);
        ConfusionMatrix cm(classes);
        for (std::size_t r = 0; r < Xte.rows(); ++r)
          cm.add(yte[r], predict_ecoc(m, as_feature_vector(Xte.row(r), layout)));
        total += balanced_accuracy(cm);
      }
      const double mean = total / static_cast<double>(splits.size());
      out.mean_bac.push_back(mean);
      if (mean > best) {
        best = mean;
        chosen = grid[g];
      }
    }
  }
  Rng rng(seed, {0xec3});
  out.model = train_ecoc(X, y, layout, classes, chosen, rng, est);
  return out;
}

}  // namespace emgcascade
