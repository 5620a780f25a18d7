#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include <emgcascade/dataset_io.hpp>
#include <emgcascade/signal_model.hpp>
#include <emgcascade/synthetic.hpp>

using namespace emgcascade;

namespace {

Recording ramp_recording(std::size_t channels, std::size_t samples, double fs, int label) {
  Matrix m(channels, samples);
  for (std::size_t l = 0; l < channels; ++l)
    for (std::size_t t = 0; t < samples; ++t) m(l, t) = static_cast<double>(1000 * l + t);
  return {std::move(m), fs, label, "s1"};
}

}  // namespace

TEST(Segmentation, WindowCountAndRemainder) {
  // 2.3 s at 1 kHz, 500 ms windows: 4 full windows, remainder dropped.
  const auto windows = segment_recording(ramp_recording(3, 2300, 1000.0, 2), 500.0);
  ASSERT_EQ(windows.size(), 4u);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    EXPECT_EQ(windows[w].sample_count(), 500u);
    EXPECT_EQ(windows[w].class_label, 2);
    EXPECT_EQ(windows[w].samples(1, 0), 1000.0 + 500.0 * static_cast<double>(w));
  }
}

TEST(Segmentation, WindowsAreDisjointAndCoverThePrefix) {
  const auto rec = ramp_recording(1, 4000, 4000.0, 1);
  const auto windows = segment_recording(rec, 250.0);
  std::set<double> seen;
  for (const auto& w : windows)
    for (double v : w.samples.row(0)) EXPECT_TRUE(seen.insert(v).second);
  EXPECT_EQ(seen.size(), 4000u);
}

TEST(Segmentation, ShorterThanOneWindowThrows) {
  EXPECT_THROW(segment_recording(ramp_recording(2, 499, 1000.0, 1), 500.0), std::invalid_argument);
}

TEST(Segmentation, SampleRateComesFromTheRecording) {
  EXPECT_EQ(window_sample_count(500.0, 4000.0), 2000u);
  EXPECT_EQ(window_sample_count(500.0, 1000.0), 500u);
  EXPECT_THROW(window_sample_count(0.0, 1000.0), std::invalid_argument);
}

TEST(ChannelSelection, FirstEightOfTwelve) {
  const auto rec = ramp_recording(12, 10, 1000.0, 1);
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  const auto sel = select_channels(rec, idx);
  EXPECT_EQ(sel.channel_count(), 8u);
  EXPECT_EQ(sel.channels(7, 3), rec.channels(7, 3));
}

TEST(ChannelSelection, KeepsRequestedOrder) {
  const auto sel = select_channels(ramp_recording(4, 5, 1000.0, 1), {3, 0});
  EXPECT_EQ(sel.channels(0, 0), 3000.0);
  EXPECT_EQ(sel.channels(1, 0), 0.0);
}

TEST(ChannelSelection, Errors) {
  const auto rec = ramp_recording(4, 5, 1000.0, 1);
  EXPECT_THROW(select_channels(rec, {4}), std::out_of_range);
  EXPECT_THROW(select_channels(rec, {1, 1}), std::invalid_argument);
  EXPECT_THROW(select_channels(rec, {}), std::invalid_argument);
}

TEST(Dataset, BuildCountsClassesAndChannels) {
  std::vector<Recording> recs{ramp_recording(3, 2000, 1000.0, 1), ramp_recording(3, 1500, 1000.0, 2)};
  const auto ds = build_dataset(recs, 500.0);
  EXPECT_EQ(ds.size(), 7u);
  EXPECT_EQ(ds.class_count, 2);
  EXPECT_EQ(ds.channel_count, 3u);
}

TEST(Dataset, MissingClassIsRejected) {
  std::vector<Recording> recs{ramp_recording(3, 2000, 1000.0, 1), ramp_recording(3, 1500, 1000.0, 3)};
  EXPECT_THROW(build_dataset(recs, 500.0), std::invalid_argument);
}

TEST(Dataset, MixedChannelCountsAreRejected) {
  std::vector<Recording> recs{ramp_recording(3, 2000, 1000.0, 1), ramp_recording(2, 1500, 1000.0, 2)};
  EXPECT_THROW(build_dataset(recs, 500.0), std::invalid_argument);
}

TEST(Recording, Validation) {
  EXPECT_THROW(Recording(Matrix(0, 5), 1000.0, 1), std::invalid_argument);
  EXPECT_THROW(Recording(Matrix(1, 5), 0.0, 1), std::invalid_argument);
  EXPECT_THROW(Recording(Matrix(1, 5), 1000.0, 0), std::invalid_argument);
}

TEST(StratifiedSplit, PartitionsEveryRepeat) {
  std::vector<int> labels;
  for (int c = 1; c <= 3; ++c)
    for (int k = 0; k < 23 + c; ++k) labels.push_back(c);
  const auto splits = stratified_split(labels, 5, 2, 99);
  ASSERT_EQ(splits.size(), 10u);
  for (std::size_t rep = 0; rep < 2; ++rep) {
    std::vector<int> hits(labels.size(), 0);
    for (const auto& s : splits) {
      if (s.repeat != rep) continue;
      EXPECT_EQ(s.train.size() + s.test.size(), labels.size());
      for (auto i : s.test) ++hits[i];
      // Class proportions in each test fold differ from the overall by at most one window.
      for (int c = 1; c <= 3; ++c) {
        const double expected = static_cast<double>(23 + c) / 5.0;
        const auto got = std::count_if(s.test.begin(), s.test.end(), [&](auto i) { return labels[i] == c; });
        EXPECT_LE(std::abs(static_cast<double>(got) - expected), 1.0);
      }
    }
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(StratifiedSplit, FoldSizesBalanced) {
  std::vector<int> labels;
  for (int c = 1; c <= 4; ++c)
    for (int k = 0; k < 13; ++k) labels.push_back(c);
  const auto splits = stratified_split(labels, 10, 1, 1);
  std::size_t lo = labels.size(), hi = 0;
  for (const auto& s : splits) {
    lo = std::min(lo, s.test.size());
    hi = std::max(hi, s.test.size());
  }
  EXPECT_LE(hi - lo, 1u);
}

TEST(StratifiedSplit, RepeatsDifferAndSeedsReproduce) {
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = 1 + static_cast<int>(i % 3);
  const auto a = stratified_split(labels, 4, 2, 5);
  const auto b = stratified_split(labels, 4, 2, 5);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].test, b[i].test);
  EXPECT_NE(a[0].test, a[4].test);
}

TEST(StratifiedSplit, TooFewWindowsNamesTheClass) {
  std::vector<int> labels{1, 1, 1, 2, 2, 2, 2};
  try {
    stratified_split(labels, 4, 1, 0);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(DatasetIo, RoundTripThroughManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "emgcascade_io_test";
  std::filesystem::remove_all(dir);
  Matrix m(2, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    m(0, t) = 0.1 * static_cast<double>(t) + 1e-17;
    m(1, t) = -1.0 / 3.0 * static_cast<double>(t);
  }
  write_recordings(dir, {{"a.csv", Recording(m, 2000.0, 2, "subj")}, {"b.csv", Recording(m, 2000.0, 1, "subj")}});
  const auto recs = load_recordings(dir / "manifest.json");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].class_label, 2);
  EXPECT_EQ(recs[0].subject_id, "subj");
  EXPECT_EQ(recs[0].sample_rate_hz, 2000.0);
  EXPECT_TRUE(recs[0].channels == m);  // bitwise: shortest round-trip formatting
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, BadHeaderAndBadCellReportLocation) {
  const auto dir = std::filesystem::temp_directory_path() / "emgcascade_io_bad";
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "h.csv") << "ch1,chX\n1,2\n"; }
  EXPECT_THROW(read_channels_csv(dir / "h.csv"), std::runtime_error);
  { std::ofstream(dir / "c.csv") << "ch1,ch2\n1,2\n3,oops\n"; }
  try {
    read_channels_csv(dir / "c.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Synthetic, DatasetShape) {
  SynthSpec spec;
  spec.windows_per_class = 100;
  const auto ds = generate_synthetic(spec, 1);
  EXPECT_EQ(ds.size(), 400u);
  EXPECT_EQ(ds.class_count, 4);
  EXPECT_EQ(ds.channel_count, 8u);
  EXPECT_EQ(ds.windows.front().sample_count(), 2000u);
}

TEST(Synthetic, FixedSeedReproduces) {
  SynthSpec spec;
  spec.windows_per_class = 3;
  const auto a = generate_synthetic(spec, 77);
  const auto b = generate_synthetic(spec, 77);
  const auto c = generate_synthetic(spec, 78);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a.windows[i].samples == b.windows[i].samples);
  EXPECT_FALSE(a.windows[0].samples == c.windows[0].samples);
}

TEST(Synthetic, DesignatedChannelsCarryTheGain) {
  SynthSpec spec;
  spec.windows_per_class = 30;
  spec.amplitude_jitter = 0.0;
  const auto ds = generate_synthetic(spec, 4);
  // Mean power per (class, channel): designated channels are louder by gain^2.
  for (const auto& w : ds.windows) {
    const int cls0 = *w.class_label - 1;
    for (std::size_t l = 0; l < spec.channels; ++l) {
      double p = 0.0;
      for (double v : w.samples.row(l)) p += v * v;
      p /= static_cast<double>(w.sample_count());
      const double expected = is_designated(l, cls0, spec.classes) ? 4.0 : 1.0;
      EXPECT_NEAR(p, expected, 1e-9);
    }
  }
}

TEST(Synthetic, SpecJsonRejectsUnknownKeys) {
  EXPECT_THROW(nlohmann::json({{"clases", 3}}).get<SynthSpec>(), std::invalid_argument);
  const SynthSpec s = nlohmann::json({{"classes", 3}, {"channels", 5}}).get<SynthSpec>();
  EXPECT_EQ(s.classes, 3);
  EXPECT_EQ(s.channels, 5u);
  EXPECT_THROW(nlohmann::json({{"classes", 1}}).get<SynthSpec>(), std::invalid_argument);
  EXPECT_THROW(nlohmann::json({{"designated_gain", 1.5}}).get<SynthSpec>(), std::invalid_argument);
}
