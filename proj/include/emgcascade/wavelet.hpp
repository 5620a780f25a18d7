#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emgcascade {

/// Daubechies-6 analysis low-pass filter (12 taps, minimum phase).
inline constexpr std::array<double, 12> kDb6Lowpass = {
    -0.0010773010853084795649, 0.0047772575109455106396, 0.00055384220116149613925,
    -0.031582039317486029565,  0.027522865530305728626,  0.097501605587323049102,
    -0.12976686756726193556,   -0.22626469396543982008,  0.31525035170919762909,
    0.75113390802109535068,    0.49462389039845308568,   0.11154074335010946362};

/// Quadrature-mirror high-pass companion: g[j] = (-1)^j h[11 - j].
inline constexpr std::array<double, 12> kDb6Highpass = [] {
  std::array<double, 12> g{};
  for (std::size_t j = 0; j < 12; ++j) g[j] = (j % 2 ? -1.0 : 1.0) * kDb6Lowpass[11 - j];
  return g;
}();

/// Multilevel decomposition. `details` are ordered coarse to fine
/// (D_levels, ..., D_1).
struct WaveletCoefficients {
  std::vector<double> approx;
  std::vector<std::vector<double>> details;
  std::size_t signal_length = 0;

  std::size_t levels() const noexcept { return details.size(); }
};

namespace detail {

// One periodized analysis step. Odd-length input is first extended by
// repeating its last sample.
inline void dwt_step(std::span<const double> x, std::vector<double>& approx,
                     std::vector<double>& detail) {
  const std::size_t n = x.size();
  const std::size_t padded = n + (n % 2);
  const std::size_t half = padded / 2;
  approx.assign(half, 0.0);
  detail.assign(half, 0.0);
  auto at = [&](std::size_t i) { return i < n ? x[i] : x[n - 1]; };
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t j = 0; j < kDb6Lowpass.size(); ++j) {
      const double v = at((2 * k + j) % padded);
      a += kDb6Lowpass[j] * v;
      d += kDb6Highpass[j] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

// Adjoint of dwt_step; returns the first `out_length` samples.
inline std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail,
                                     std::size_t out_length) {
  const std::size_t half = approx.size();
  const std::size_t padded = 2 * half;
  std::vector<double> y(padded, 0.0);
  for (std::size_t k = 0; k < half; ++k)
    for (std::size_t j = 0; j < kDb6Lowpass.size(); ++j)
      y[(2 * k + j) % padded] += kDb6Lowpass[j] * approx[k] + kDb6Highpass[j] * detail[k];
  y.resize(out_length);
  return y;
}

}  // namespace detail

/// Mallat cascade with the db6 pair and periodic extension. The coefficient
/// count at level k is ceil(N / 2^k).
inline WaveletCoefficients dwt_db6(std::span<const double> signal, std::size_t levels = 3) {
  if (levels == 0) throw std::invalid_argument("dwt_db6: levels must be >= 1");
  if (signal.size() < (std::size_t{1} << levels))
    throw std::invalid_argument("dwt_db6: signal of length " + std::to_string(signal.size()) +
                                " too short for " + std::to_string(levels) + " levels");
  WaveletCoefficients out;
  out.signal_length = signal.size();
  out.details.resize(levels);
  std::vector<double> current(signal.begin(), signal.end());
  std::vector<double> approx, detail;
  for (std::size_t lvl = 0; lvl < levels; ++lvl) {
    detail::dwt_step(current, approx, detail);
    out.details[levels - 1 - lvl] = std::move(detail);
    current = approx;
  }
  out.approx = std::move(current);
  return out;
}

inline std::vector<double> idwt_db6(const WaveletCoefficients& coeffs) {
  const std::size_t levels = coeffs.levels();
  // Lengths of the intermediate approximations, finest first.
  std::vector<std::size_t> lengths(levels + 1);
  lengths[0] = coeffs.signal_length;
  for (std::size_t k = 1; k <= levels; ++k) lengths[k] = (lengths[k - 1] + 1) / 2;
  if (coeffs.approx.size() != lengths[levels])
    throw std::invalid_argument("idwt_db6: approximation length inconsistent with signal length");
  std::vector<double> current = coeffs.approx;
  for (std::size_t k = levels; k >= 1; --k) {
    const auto& d = coeffs.details[levels - k];
    if (d.size() != current.size())
      throw std::invalid_argument("idwt_db6: detail length mismatch at level " + std::to_string(k));
    current = detail::idwt_step(current, d, lengths[k - 1]);
  }
  return current;
}

}  // namespace emgcascade
