#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "emgcascade/matrix.hpp"
#include "emgcascade/random.hpp"

namespace emgcascade {

/// A labelled multi-channel recording. Rows of `channels` are channels,
/// columns are samples.
struct Recording {
  Matrix channels;
  double sample_rate_hz = 0.0;
  int class_label = 1;
  std::string subject_id;

  Recording() = default;
  Recording(Matrix ch, double rate, int label, std::string subject = {})
      : channels(std::move(ch)), sample_rate_hz(rate), class_label(label),
        subject_id(std::move(subject)) {
    validate();
  }

  std::size_t channel_count() const noexcept { return channels.rows(); }
  std::size_t sample_count() const noexcept { return channels.cols(); }

  void validate() const {
    if (channels.rows() < 1) throw std::invalid_argument("Recording: needs at least one channel");
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("Recording: sample rate must be positive");
    if (class_label < 1) throw std::invalid_argument("Recording: class label must be >= 1");
  }
};

/// Fixed-length block of samples: the unit of classification.
struct SignalWindow {
  Matrix samples;  // L x N
  double sample_rate_hz = 0.0;
  std::optional<int> class_label;

  std::size_t channel_count() const noexcept { return samples.rows(); }
  std::size_t sample_count() const noexcept { return samples.cols(); }
};

struct Dataset {
  std::vector<SignalWindow> windows;
  int class_count = 0;
  std::size_t channel_count = 0;

  std::size_t size() const noexcept { return windows.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(w.class_label.value_or(0));
    return out;
  }

  void validate() const {
    if (class_count < 1) throw std::invalid_argument("Dataset: class count must be >= 1");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(class_count), 0);
    for (const auto& w : windows) {
      if (!w.class_label || *w.class_label < 1 || *w.class_label > class_count)
        throw std::invalid_argument("Dataset: window label outside 1..M");
      if (w.channel_count() != channel_count)
        throw std::invalid_argument("Dataset: window channel count differs from dataset");
      ++per_class[static_cast<std::size_t>(*w.class_label - 1)];
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
      if (per_class[c] == 0)
        throw std::invalid_argument("Dataset: class " + std::to_string(c + 1) + " has no windows");
  }
};

inline std::size_t window_sample_count(double window_ms, double sample_rate_hz) {
  if (!(window_ms > 0.0)) throw std::invalid_argument("window length must be positive");
  return static_cast<std::size_t>(std::llround(window_ms * sample_rate_hz / 1000.0));
}

/// Splits a recording into consecutive, disjoint windows starting at sample
/// 0. A trailing remainder shorter than one window is dropped.
inline std::vector<SignalWindow> segment_recording(const Recording& rec, double window_ms) {
  const std::size_t n = window_sample_count(window_ms, rec.sample_rate_hz);
  if (n == 0 || rec.sample_count() < n)
    throw std::invalid_argument("segment_recording: recording of " +
                                std::to_string(rec.sample_count()) +
                                " samples is shorter than one window of " + std::to_string(n) +
                                " samples");
  const std::size_t count = rec.sample_count() / n;
  std::vector<SignalWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Matrix block(rec.channel_count(), n);
    for (std::size_t l = 0; l < rec.channel_count(); ++l) {
      auto src = rec.channels.row(l).subspan(w * n, n);
      std::copy(src.begin(), src.end(), block.row(l).begin());
    }
    out.push_back({std::move(block), rec.sample_rate_hz, rec.class_label});
  }
  return out;
}

inline Recording select_channels(const Recording& rec, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("select_channels: empty index list");
  std::set<std::size_t> seen;
  for (auto i : indices) {
    if (i >= rec.channel_count())
      throw std::out_of_range("select_channels: channel index " + std::to_string(i) +
                              " out of range (" + std::to_string(rec.channel_count()) +
                              " channels)");
    if (!seen.insert(i).second)
      throw std::invalid_argument("select_channels: duplicate channel index " + std::to_string(i));
  }
  return {select_rows(rec.channels, indices), rec.sample_rate_hz, rec.class_label, rec.subject_id};
}

/// Builds a dataset from recordings: optional channel selection, then
/// segmentation. The class count is the largest label seen.
inline Dataset build_dataset(const std::vector<Recording>& recordings, double window_ms,
                             const std::vector<std::size_t>& channels = {}) {
  Dataset ds;
  for (const auto& rec : recordings) {
    const Recording r = channels.empty() ? rec : select_channels(rec, channels);
    if (ds.windows.empty() && ds.channel_count == 0) ds.channel_count = r.channel_count();
    if (r.channel_count() != ds.channel_count)
      throw std::invalid_argument("build_dataset: recordings have different channel counts");
    for (auto& w : segment_recording(r, window_ms)) ds.windows.push_back(std::move(w));
    ds.class_count = std::max(ds.class_count, r.class_label);
  }
  ds.validate();
  return ds;
}

struct Split {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Repeated stratified k-fold partition of `labels` (values 1..M).
///
/// Each class is shuffled with a generator keyed by (seed, repeat) and dealt
/// round-robin over the folds, continuing the fold cursor across classes so
/// fold sizes stay balanced. Output is ordered by repeat, then fold.
inline std::vector<Split> stratified_split(const std::vector<int>& labels, std::size_t folds,
                                           std::size_t repeats, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("stratified_split: need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class)
    if (members.size() < folds)
      throw std::invalid_argument("stratified_split: class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " windows, fewer than " +
                                  std::to_string(folds) + " folds");

  std::vector<Split> out;
  out.reserve(folds * repeats);
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    Rng rng(seed, {0x5f11u, rep});
    std::vector<std::size_t> fold_of(labels.size(), 0);
    std::size_t cursor = 0;
    for (auto& [label, members] : by_class) {
      auto shuffled = members;
      rng.shuffle(shuffled.begin(), shuffled.end());
      for (auto idx : shuffled) fold_of[idx] = cursor++ % folds;
    }
    for (std::size_t f = 0; f < folds; ++f) {
      Split s{rep, f, {}, {}};
      for (std::size_t i = 0; i < labels.size(); ++i)
        (fold_of[i] == f ? s.test : s.train).push_back(i);
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline std::vector<Split> stratified_split(const Dataset& ds, std::size_t folds,
                                           std::size_t repeats, std::uint64_t seed) {
  return stratified_split(ds.labels(), folds, repeats, seed);
}

}  // namespace emgcascade
