#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace emgcascade {

/// Rows are true classes, columns predicted classes (labels 1..M).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes)
      : m_(classes), counts_(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {
    if (classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
  }

  ConfusionMatrix(int classes, std::span<const int> truth, std::span<const int> predicted)
      : ConfusionMatrix(classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("ConfusionMatrix: size mismatch");
    for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
  }

  static ConfusionMatrix from_counts(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw std::invalid_argument("ConfusionMatrix: not square");
      for (std::size_t c = 0; c < rows.size(); ++c) cm.counts_[r * rows.size() + c] = rows[r][c];
    }
    return cm;
  }

  void add(int truth, int predicted) {
    if (truth < 1 || truth > m_ || predicted < 1 || predicted > m_)
      throw std::out_of_range("ConfusionMatrix: label out of range");
    ++counts_[static_cast<std::size_t>(truth - 1) * static_cast<std::size_t>(m_) +
              static_cast<std::size_t>(predicted - 1)];
  }

  int classes() const noexcept { return m_; }
  std::uint64_t operator()(int truth_idx, int pred_idx) const {
    return counts_[static_cast<std::size_t>(truth_idx) * static_cast<std::size_t>(m_) +
                   static_cast<std::size_t>(pred_idx)];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (int i = 0; i < m_; ++i) t += (*this)(i, i);
    return t;
  }
  std::uint64_t row_sum(int i) const {
    std::uint64_t t = 0;
    for (int j = 0; j < m_; ++j) t += (*this)(i, j);
    return t;
  }
  std::uint64_t col_sum(int j) const {
    std::uint64_t t = 0;
    for (int i = 0; i < m_; ++i) t += (*this)(i, j);
    return t;
  }

 private:
  int m_;
  std::vector<std::uint64_t> counts_;
};

/// Mean per-class recall. Classes with no samples are skipped and reported
/// through `skipped_empty_rows`.
inline double balanced_accuracy(const ConfusionMatrix& cm, bool* skipped_empty_rows = nullptr) {
  double sum = 0.0;
  int used = 0;
  for (int i = 0; i < cm.classes(); ++i) {
    const auto n = cm.row_sum(i);
    if (n == 0) continue;
    sum += static_cast<double>(cm(i, i)) / static_cast<double>(n);
    ++used;
  }
  if (skipped_empty_rows) *skipped_empty_rows = used < cm.classes();
  return used ? sum / used : 0.0;
}

/// Cohen's kappa; 0 when the chance agreement is 1.
inline double cohens_kappa(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n == 0.0) return 0.0;
  const double po = static_cast<double>(cm.trace()) / n;
  double pe = 0.0;
  for (int i = 0; i < cm.classes(); ++i)
    pe += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i));
  pe /= n * n;
  if (pe >= 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

/// Micro-averaged F1 from pooled TP/FP/FN. For single-label multiclass
/// predictions it equals accuracy.
inline double micro_f1(const ConfusionMatrix& cm) {
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (int k = 0; k < cm.classes(); ++k) {
    const double hit = static_cast<double>(cm(k, k));
    tp += hit;
    fp += static_cast<double>(cm.col_sum(k)) - hit;
    fn += static_cast<double>(cm.row_sum(k)) - hit;
  }
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace emgcascade
