#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgcascade/random.hpp"
#include "emgcascade/signal_model.hpp"

namespace emgcascade {

/// Parameters of the synthetic multi-channel "sEMG" generator.
///
/// Every channel carries band-limited Gaussian noise (an AR(2) resonator).
/// Channel l is "designated" for class c when l mod M == c: there its gain
/// is `designated_gain` times the base gain and its resonance sits
/// `designated_shift` times higher. Each window also gets a log-normal
/// amplitude jitter per channel, so classes overlap window to window.
/// Classes are separable through MAV features when L >= M.
struct SynthSpec {
  int classes = 4;
  std::size_t channels = 8;
  std::size_t windows_per_class = 100;
  double sample_rate_hz = 4000.0;
  double window_ms = 500.0;
  double designated_gain = 2.0;
  double designated_shift = 1.25;
  double center_hz = 120.0;
  double pole_radius = 0.9;
  double amplitude_jitter = 0.25;  // std-dev of the log gain
  double base_amplitude = 1.0;
  std::string subject_id = "synthetic";

  void validate() const {
    if (classes < 2) throw std::invalid_argument("SynthSpec: need at least 2 classes");
    if (channels < 1) throw std::invalid_argument("SynthSpec: need at least 1 channel");
    if (windows_per_class < 1) throw std::invalid_argument("SynthSpec: windows_per_class must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("SynthSpec: sample rate must be positive");
    if (!(designated_gain >= 2.0)) throw std::invalid_argument("SynthSpec: designated_gain must be >= 2");
    if (!(pole_radius > 0.0 && pole_radius < 1.0)) throw std::invalid_argument("SynthSpec: pole_radius must be in (0, 1)");
    if (!(center_hz > 0.0 && center_hz * designated_shift < sample_rate_hz / 2.0))
      throw std::invalid_argument("SynthSpec: resonance must lie below Nyquist");
  }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"classes", s.classes},
       {"channels", s.channels},
       {"windows_per_class", s.windows_per_class},
       {"sample_rate_hz", s.sample_rate_hz},
       {"window_ms", s.window_ms},
       {"designated_gain", s.designated_gain},
       {"designated_shift", s.designated_shift},
       {"center_hz", s.center_hz},
       {"pole_radius", s.pole_radius},
       {"amplitude_jitter", s.amplitude_jitter},
       {"base_amplitude", s.base_amplitude},
       {"subject_id", s.subject_id}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  const nlohmann::json defaults = SynthSpec{};
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw std::invalid_argument("synth spec: unknown key '" + key + "'");
  s = SynthSpec{};
  s.classes = j.value("classes", s.classes);
  s.channels = j.value("channels", s.channels);
  s.windows_per_class = j.value("windows_per_class", s.windows_per_class);
  s.sample_rate_hz = j.value("sample_rate_hz", s.sample_rate_hz);
  s.window_ms = j.value("window_ms", s.window_ms);
  s.designated_gain = j.value("designated_gain", s.designated_gain);
  s.designated_shift = j.value("designated_shift", s.designated_shift);
  s.center_hz = j.value("center_hz", s.center_hz);
  s.pole_radius = j.value("pole_radius", s.pole_radius);
  s.amplitude_jitter = j.value("amplitude_jitter", s.amplitude_jitter);
  s.base_amplitude = j.value("base_amplitude", s.base_amplitude);
  s.subject_id = j.value("subject_id", s.subject_id);
  s.validate();
}

inline bool is_designated(std::size_t channel, int cls0, int classes) {
  return static_cast<int>(channel % static_cast<std::size_t>(classes)) == cls0;
}

namespace detail {

// Unit-variance AR(2) resonator output of length n.
inline std::vector<double> resonator_noise(std::size_t n, double center_hz, double fs, double radius,
                                           Rng& rng) {
  constexpr std::size_t kBurnIn = 256;
  const double theta = 2.0 * std::numbers::pi * center_hz / fs;
  const double a1 = 2.0 * radius * std::cos(theta);
  const double a2 = -radius * radius;
  std::vector<double> y(n + kBurnIn, 0.0);
  for (std::size_t t = 0; t < y.size(); ++t) {
    double v = rng.normal();
    if (t >= 1) v += a1 * y[t - 1];
    if (t >= 2) v += a2 * y[t - 2];
    y[t] = v;
  }
  y.erase(y.begin(), y.begin() + kBurnIn);
  double p = 0.0;
  for (double v : y) p += v * v;
  const double scale = 1.0 / std::sqrt(p / static_cast<double>(n));
  for (double& v : y) v *= scale;
  return y;
}

}  // namespace detail

/// One window of class `cls` (1-based).
inline SignalWindow synthesize_window(const SynthSpec& spec, int cls, Rng& rng) {
  const std::size_t n = window_sample_count(spec.window_ms, spec.sample_rate_hz);
  SignalWindow w{Matrix(spec.channels, n), spec.sample_rate_hz, cls};
  for (std::size_t l = 0; l < spec.channels; ++l) {
    const bool designated = is_designated(l, cls - 1, spec.classes);
    // Channels differ slightly in their resting resonance.
    const double channel_center = spec.center_hz * (1.0 + 0.05 * static_cast<double>(l % 4));
    const double center = channel_center * (designated ? spec.designated_shift : 1.0);
    const double gain = spec.base_amplitude * (designated ? spec.designated_gain : 1.0) *
                        std::exp(spec.amplitude_jitter * rng.normal());
    const auto noise = detail::resonator_noise(n, center, spec.sample_rate_hz, spec.pole_radius, rng);
    auto row = w.samples.row(l);
    for (std::size_t t = 0; t < n; ++t) row[t] = gain * noise[t];
  }
  return w;
}

/// One continuous recording per class: the class's windows back to back.
/// Segmenting these recordings reproduces generate_synthetic exactly.
inline std::vector<Recording> generate_synthetic_recordings(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = window_sample_count(spec.window_ms, spec.sample_rate_hz);
  std::vector<Recording> out;
  for (int c = 1; c <= spec.classes; ++c) {
    Matrix m(spec.channels, n * spec.windows_per_class);
    for (std::size_t k = 0; k < spec.windows_per_class; ++k) {
      Rng rng(seed, {0x5e7, static_cast<std::uint64_t>(c), k});
      const auto w = synthesize_window(spec, c, rng);
      for (std::size_t l = 0; l < spec.channels; ++l)
        std::copy(w.samples.row(l).begin(), w.samples.row(l).end(), m.row(l).begin() + static_cast<std::ptrdiff_t>(k * n));
    }
    out.emplace_back(std::move(m), spec.sample_rate_hz, c, spec.subject_id);
  }
  return out;
}

inline Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  return build_dataset(generate_synthetic_recordings(spec, seed), spec.window_ms);
}

}  // namespace emgcascade
