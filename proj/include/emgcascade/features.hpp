#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emgcascade/dataset_io.hpp"
#include "emgcascade/matrix.hpp"
#include "emgcascade/signal_model.hpp"
#include "emgcascade/wavelet.hpp"

namespace emgcascade {

inline constexpr std::size_t kDecompositionLevels = 3;
/// MAV and SSC for each of A3, D3, D2, D1.
inline constexpr std::size_t kFeaturesPerChannel = 2 * (kDecompositionLevels + 1);

/// Mean absolute value.
inline double mav(std::span<const double> seq) {
  if (seq.empty()) throw std::invalid_argument("mav: empty sequence");
  double s = 0.0;
  for (double v : seq) s += std::abs(v);
  return s / static_cast<double>(seq.size());
}

/// Slope sign changes: interior points i with
/// (x[i] - x[i-1]) * (x[i] - x[i+1]) > threshold. Sequences shorter than 3
/// give 0 and set `*too_short` when provided.
inline double ssc(std::span<const double> seq, double threshold = 0.0, bool* too_short = nullptr) {
  if (too_short) *too_short = seq.size() < 3;
  if (seq.size() < 3) return 0.0;
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < seq.size(); ++i)
    if ((seq[i] - seq[i - 1]) * (seq[i] - seq[i + 1]) > threshold) ++count;
  return static_cast<double>(count);
}

/// Per-channel block sizes of a concatenated feature vector.
struct FeatureLayout {
  std::vector<std::size_t> dims;

  static FeatureLayout uniform(std::size_t channels, std::size_t per_channel) {
    return {std::vector<std::size_t>(channels, per_channel)};
  }
  std::size_t channels() const noexcept { return dims.size(); }
  std::size_t total() const noexcept { return std::accumulate(dims.begin(), dims.end(), std::size_t{0}); }
  std::size_t offset(std::size_t channel) const {
    return std::accumulate(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(channel),
                           std::size_t{0});
  }
  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

/// x = (x_1, ..., x_L) stored flat, with the block layout alongside.
struct FullFeatureVector {
  std::vector<double> values;
  FeatureLayout layout;

  std::span<const double> channel(std::size_t l) const {
    return std::span<const double>(values).subspan(layout.offset(l), layout.dims.at(l));
  }
};

struct FeatureOptions {
  double ssc_threshold = 0.0;
};

/// Features of one channel in the order (A3, D3, D2, D1) x (MAV, SSC).
inline std::vector<double> channel_features(std::span<const double> samples,
                                            const FeatureOptions& opt = {}) {
  const auto coeffs = dwt_db6(samples, kDecompositionLevels);
  std::vector<double> out;
  out.reserve(kFeaturesPerChannel);
  auto push = [&](const std::vector<double>& c) {
    out.push_back(mav(c));
    out.push_back(ssc(c, opt.ssc_threshold));
  };
  push(coeffs.approx);
  for (const auto& d : coeffs.details) push(d);
  return out;
}

inline FullFeatureVector extract_features(const SignalWindow& w, const FeatureOptions& opt = {}) {
  FullFeatureVector x;
  x.layout = FeatureLayout::uniform(w.channel_count(), kFeaturesPerChannel);
  x.values.reserve(x.layout.total());
  for (std::size_t l = 0; l < w.channel_count(); ++l) {
    const auto block = channel_features(w.samples.row(l), opt);
    x.values.insert(x.values.end(), block.begin(), block.end());
  }
  return x;
}

/// Feature matrix (one row per window) for a whole dataset.
inline Matrix extract_feature_matrix(const std::vector<SignalWindow>& windows,
                                     const FeatureOptions& opt = {}) {
  Matrix X;
  for (const auto& w : windows) X.append_row(extract_features(w, opt).values);
  return X;
}

/// Column names `ch{l}_{A3|D3|D2|D1}_{mav|ssc}` (1-based channel numbers).
inline std::vector<std::string> feature_names(std::size_t channels) {
  static const char* bands[] = {"A3", "D3", "D2", "D1"};
  std::vector<std::string> names;
  for (std::size_t l = 0; l < channels; ++l)
    for (const char* b : bands)
      for (const char* f : {"mav", "ssc"})
        names.push_back("ch" + std::to_string(l + 1) + "_" + b + "_" + f);
  return names;
}

inline void write_feature_dump(const std::filesystem::path& path, const Matrix& X,
                               const std::vector<int>& labels) {
  if (X.rows() != labels.size()) throw std::invalid_argument("write_feature_dump: row/label mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label";
  for (const auto& n : feature_names(X.cols() / kFeaturesPerChannel)) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < X.rows(); ++r) {
    out << labels[r];
    for (double v : X.row(r)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

}  // namespace emgcascade
