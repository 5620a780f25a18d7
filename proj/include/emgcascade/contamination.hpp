#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emgcascade/random.hpp"
#include "emgcascade/signal_model.hpp"

namespace emgcascade {

enum class NoiseKind { PowerLine, Attenuation, GaussianNoise, Clipping, BaselineWander };

inline constexpr std::array<NoiseKind, 5> kAllNoiseKinds = {
    NoiseKind::PowerLine, NoiseKind::Attenuation, NoiseKind::GaussianNoise, NoiseKind::Clipping,
    NoiseKind::BaselineWander};

inline constexpr std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::PowerLine: return "power_line";
    case NoiseKind::Attenuation: return "attenuation";
    case NoiseKind::GaussianNoise: return "gaussian";
    case NoiseKind::Clipping: return "clipping";
    case NoiseKind::BaselineWander: return "baseline_wander";
  }
  return "unknown";
}

inline NoiseKind noise_kind_from_string(std::string_view s) {
  for (auto k : kAllNoiseKinds)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown noise kind '" + std::string(s) + "'");
}

/// "No noise" sentinel for the SNR argument.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

inline double signal_power(std::span<const double> seq) {
  if (seq.empty()) return 0.0;
  double s = 0.0;
  for (double v : seq) s += v * v;
  return s / static_cast<double>(seq.size());
}

/// 10 log10(P(clean) / P(noisy - clean)); +inf when nothing changed.
inline double measured_snr_db(std::span<const double> clean, std::span<const double> noisy) {
  if (clean.size() != noisy.size()) throw std::invalid_argument("measured_snr_db: length mismatch");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ps += clean[i] * clean[i];
    const double d = noisy[i] - clean[i];
    pn += d * d;
  }
  if (pn == 0.0) return kNoNoise;
  return 10.0 * std::log10(ps / pn);
}

namespace detail {

inline double require_power(std::span<const double> seq, const char* who) {
  const double p = signal_power(seq);
  if (!(p > 0.0)) throw std::invalid_argument(std::string(who) + ": input has zero power");
  return p;
}

// Adds `noise` scaled so its realized power is P_signal / 10^(snr/10).
inline std::vector<double> add_scaled(std::span<const double> seq, std::vector<double> noise,
                                      double signal_pow, double snr_db) {
  std::vector<double> out(seq.begin(), seq.end());
  if (std::isinf(snr_db) && snr_db > 0) return out;
  const double noise_pow = signal_power(noise);
  if (!(noise_pow > 0.0)) return out;
  const double scale = std::sqrt(signal_pow / (noise_pow * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * noise[i];
  return out;
}

inline std::vector<double> add_sinusoid(std::span<const double> seq, double sample_rate_hz,
                                        double snr_db, double f_lo, double f_hi, Rng& rng,
                                        const char* who) {
  const double p = require_power(seq, who);
  const double freq = rng.uniform(f_lo, f_hi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> wave(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t)
    wave[t] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / sample_rate_hz + phase);
  return add_scaled(seq, std::move(wave), p, snr_db);
}

}  // namespace detail

/// Mains interference: a sinusoid with frequency drawn from [48, 52] Hz.
inline std::vector<double> add_powerline(std::span<const double> seq, double sample_rate_hz,
                                         double snr_db, Rng& rng) {
  return detail::add_sinusoid(seq, sample_rate_hz, snr_db, 48.0, 52.0, rng, "add_powerline");
}

/// Loss of electrode contact: out = a * seq with a = 1 - 10^(-snr/20).
inline std::vector<double> attenuate(std::span<const double> seq, double snr_db) {
  const double a = std::clamp(1.0 - std::pow(10.0, -snr_db / 20.0), 0.0, 1.0);
  std::vector<double> out(seq.begin(), seq.end());
  for (double& v : out) v *= a;
  return out;
}

inline std::vector<double> add_gaussian(std::span<const double> seq, double snr_db, Rng& rng) {
  const double p = detail::require_power(seq, "add_gaussian");
  std::vector<double> noise(seq.size());
  for (double& v : noise) v = rng.normal();
  return detail::add_scaled(seq, std::move(noise), p, snr_db);
}

/// Baseline wander: a sinusoid with frequency drawn from [0.5, 1.5] Hz.
inline std::vector<double> add_baseline_wander(std::span<const double> seq, double sample_rate_hz,
                                               double snr_db, Rng& rng) {
  return detail::add_sinusoid(seq, sample_rate_hz, snr_db, 0.5, 1.5, rng, "add_baseline_wander");
}

/// Saturation level c of the soft clipper out = c * tanh(seq / c) that puts
/// the distortion at `snr_db` (within 0.05 dB). The achievable range is
/// (0 dB, +inf); requests below it throw.
inline double clipping_level(std::span<const double> seq, double snr_db) {
  const double p = detail::require_power(seq, "clip_nonlinear");
  double peak = 0.0;
  for (double v : seq) peak = std::max(peak, std::abs(v));
  auto snr_at = [&](double c) {
    double d = 0.0;
    for (double v : seq) {
      const double e = v - c * std::tanh(v / c);
      d += e * e;
    }
    d /= static_cast<double>(seq.size());
    return d > 0.0 ? 10.0 * std::log10(p / d) : kNoNoise;
  };
  constexpr double kTolerance = 0.05;
  double lo = peak * 1e-12;
  double hi = peak;
  const double snr_lo = snr_at(lo);
  if (snr_lo > snr_db + kTolerance)
    throw std::domain_error("clip_nonlinear: SNR " + std::to_string(snr_db) +
                            " dB unreachable; achievable range is (" + std::to_string(snr_lo) +
                            ", inf) dB");
  if (snr_lo >= snr_db) return lo;
  for (int i = 0; snr_at(hi) < snr_db; ++i) {
    if (i > 200) throw std::domain_error("clip_nonlinear: cannot bracket requested SNR");
    lo = hi;
    hi *= 2.0;
  }
  // Distortion power decreases monotonically in c, so bisect on log c.
  double c = hi;
  for (int i = 0; i < 200; ++i) {
    c = std::sqrt(lo * hi);
    const double s = snr_at(c);
    if (std::abs(s - snr_db) < 1e-4) break;
    (s < snr_db ? lo : hi) = c;
  }
  return c;
}

inline std::vector<double> clip_nonlinear(std::span<const double> seq, double snr_db) {
  std::vector<double> out(seq.begin(), seq.end());
  if (std::isinf(snr_db) && snr_db > 0) return out;
  const double c = clipping_level(seq, snr_db);
  for (double& v : out) v = c * std::tanh(v / c);
  return out;
}

inline std::vector<double> apply_noise(NoiseKind kind, std::span<const double> seq,
                                       double sample_rate_hz, double snr_db, Rng& rng) {
  switch (kind) {
    case NoiseKind::PowerLine: return add_powerline(seq, sample_rate_hz, snr_db, rng);
    case NoiseKind::Attenuation: return attenuate(seq, snr_db);
    case NoiseKind::GaussianNoise: return add_gaussian(seq, snr_db, rng);
    case NoiseKind::Clipping: return clip_nonlinear(seq, snr_db);
    case NoiseKind::BaselineWander: return add_baseline_wander(seq, sample_rate_hz, snr_db, rng);
  }
  throw std::logic_error("apply_noise: unhandled kind");
}

/// How many channels of a window get contaminated, and optionally with what.
struct ChannelPolicy {
  std::size_t min_channels = 1;
  /// 0 means floor(L / 2), at least 1.
  std::size_t max_channels = 0;
  std::optional<NoiseKind> kind;

  /// Clipping distortion never exceeds the signal, so it cannot reach SNR < 0.
  bool reaches(double snr_db) const { return snr_db >= 0.0 || (kind && *kind != NoiseKind::Clipping); }

  std::pair<std::size_t, std::size_t> bounds(std::size_t channels) const {
    const std::size_t hi = std::min(channels, max_channels ? max_channels : std::max<std::size_t>(1, channels / 2));
    const std::size_t lo = std::min(std::max<std::size_t>(1, min_channels), hi);
    return {lo, hi};
  }
};

struct ContaminatedWindow {
  SignalWindow window;
  NoiseKind kind = NoiseKind::GaussianNoise;
  std::vector<std::size_t> affected;  // ascending channel indices
};

/// Draws one noise kind uniformly, then a channel subset per `policy`, and
/// applies that kind to every selected channel. Other channels are copied
/// unchanged.
inline ContaminatedWindow contaminate_window(const SignalWindow& w, double snr_db, Rng& rng,
                                             const ChannelPolicy& policy = {}) {
  ContaminatedWindow out{w, NoiseKind::GaussianNoise, {}};
  const std::size_t kind_draw = rng.index(kAllNoiseKinds.size());
  out.kind = policy.kind.value_or(kAllNoiseKinds[kind_draw]);
  const std::size_t channels = w.channel_count();
  const auto [lo, hi] = policy.bounds(channels);
  const std::size_t count = lo + rng.index(hi - lo + 1);
  std::vector<std::size_t> order(channels);
  for (std::size_t i = 0; i < channels; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  out.affected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.affected.begin(), out.affected.end());
  for (auto l : out.affected) {
    const auto noisy = apply_noise(out.kind, w.samples.row(l), w.sample_rate_hz, snr_db, rng);
    std::copy(noisy.begin(), noisy.end(), out.window.samples.row(l).begin());
  }
  return out;
}

}  // namespace emgcascade
