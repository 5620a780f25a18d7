#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <emgcascade/emgcascade.hpp>

using namespace emgcascade;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.classes = 3;
  s.channels = 3;
  s.windows_per_class = 16;
  s.sample_rate_hz = 1000.0;
  s.window_ms = 256.0;
  return s;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.snr_grid = {0.0, 6.0};
  c.folds = 2;
  c.repeats = 1;
  c.seed = 3;
  c.nu_grid = {0.2, 0.5};
  c.code_size_grid = {2};
  c.workers = 1;
  return c;
}

const Dataset& small_dataset() {
  static const Dataset ds = generate_synthetic(small_spec(), 11);
  return ds;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("emgcascade_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.snr_grid, (std::vector<double>{0, 1, 2, 3, 4, 5, 6, 10, 12}));
  EXPECT_EQ(c.folds, 10u);
  EXPECT_EQ(c.repeats, 3u);
  EXPECT_EQ(c.methods.size(), 4u);
  EXPECT_EQ(c.window_ms, 500.0);
  EXPECT_EQ(c.estimator, DensityEstimator::Gaussian);
}

TEST(Config, OverridesAndCleanSnr) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"snr_grid": [0, 3, "inf"], "methods": ["NBS", "B"]})"));
  ASSERT_EQ(c.snr_grid.size(), 3u);
  EXPECT_TRUE(std::isinf(c.snr_grid[2]));
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::NBS, Method::B}));
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"folds": 1})")), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"fold": 3})")), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"methods": ["XX"]})")), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"nu_grid": [0]})")), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"snr_grid": []})")), std::invalid_argument);
}

TEST(Config, NegativeSnrNeedsNonClippingKind) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"snr_grid": [-3, 0]})")), std::invalid_argument);
  const auto c = config_from_json(nlohmann::json::parse(R"({"snr_grid": [-3], "channel_policy": {"kind": "gaussian"}})"));
  EXPECT_EQ(c.snr_grid.front(), -3.0);
}

TEST(Config, JsonRoundTrip) {
  auto c = small_config();
  c.snr_grid.push_back(std::numeric_limits<double>::infinity());
  c.estimator = DensityEstimator::GaussianMixture;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, EmptyFileLoadsDefaults) {
  const auto dir = temp_dir("cfg");
  std::ofstream(dir / "empty.json").close();
  EXPECT_EQ(load_config(dir / "empty.json").folds, 10u);
}

TEST(Experiment, RecordAccounting) {
  auto cfg = small_config();
  cfg.methods = {Method::B, Method::NBS};
  const auto rec = run_experiment(small_dataset(), cfg, "s1");
  EXPECT_EQ(rec.size(), 2u * 2u * 2u * 1u);
  EXPECT_EQ(to_rows(rec).size(), 3 * rec.size());
  for (const auto& r : rec) {
    EXPECT_EQ(r.subject, "s1");
    EXPECT_GE(r.bac, 0.0);
    EXPECT_LE(r.bac, 1.0);
  }
  // Canonical order: method first.
  EXPECT_EQ(rec.front().method, Method::B);
  EXPECT_EQ(rec.back().method, Method::NBS);
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  auto one = small_config();
  auto two = small_config();
  two.workers = 2;
  const auto a = to_rows(run_experiment(small_dataset(), one));
  const auto b = to_rows(run_experiment(small_dataset(), two));
  std::ostringstream sa, sb;
  write_results_csv(sa, a);
  write_results_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Experiment, CleanInputsMakeMethodsAgree) {
  auto cfg = small_config();
  cfg.snr_grid = {std::numeric_limits<double>::infinity()};
  cfg.methods = {Method::B, Method::NBH, Method::NBS};
  const auto& ds = small_dataset();
  const auto labels = ds.labels();
  const auto X = extract_feature_matrix(ds.windows);
  const auto layout = FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel);
  const auto split = stratified_split(labels, 2, 1, 5).front();
  std::vector<int> ytr;
  for (auto i : split.train) ytr.push_back(labels[i]);
  const auto models = fit_split_models(select_rows(X, split.train), ytr, layout, ds.class_count, cfg, 9);
  // Only windows the crisp detectors pass as fully clean count.
  std::size_t agree = 0, all_clean_windows = 0;
  for (auto i : split.test) {
    const auto x = as_feature_vector(X.row(i), layout);
    const auto r = ensemble_predict(*models.occ, x, DecisionMode::Crisp);
    if (std::count(r.begin(), r.end(), 1.0) != static_cast<long>(r.size())) continue;
    ++all_clean_windows;
    const int b = models.predict(Method::B, x);
    agree += models.predict(Method::NBH, x) == b && models.predict(Method::NBS, x) == b;
  }
  ASSERT_GT(all_clean_windows, 0u);
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(all_clean_windows), 0.9);
}

TEST(Synthetic, PlainNbSeparatesClassesOnCleanSplit) {
  const auto ds = generate_synthetic(SynthSpec{}, 21);
  ASSERT_EQ(ds.size(), 400u);
  const auto labels = ds.labels();
  const auto X = extract_feature_matrix(ds.windows);
  const auto layout = FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel);
  const auto split = stratified_split(labels, 2, 1, 22).front();
  std::vector<int> ytr;
  for (auto i : split.train) ytr.push_back(labels[i]);
  const auto nb = fit_dnb(select_rows(X, split.train), ytr, layout, ds.class_count);
  ConfusionMatrix cm(ds.class_count);
  for (auto i : split.test) cm.add(labels[i], predict_B(nb, as_feature_vector(X.row(i), layout)));
  EXPECT_GE(balanced_accuracy(cm), 0.9);
}

TEST(Experiment, OnlyRequestedModelsAreTrained) {
  auto cfg = small_config();
  cfg.methods = {Method::B};
  const auto& ds = small_dataset();
  const auto X = extract_feature_matrix(ds.windows);
  const auto m = fit_split_models(X, ds.labels(), FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel),
                                  ds.class_count, cfg, 1);
  EXPECT_FALSE(m.occ.has_value());
  EXPECT_FALSE(m.ecoc.has_value());
}

TEST(Experiment, TooFewWindowsPerClassThrows) {
  auto cfg = small_config();
  cfg.folds = 50;
  EXPECT_THROW(run_experiment(small_dataset(), cfg), std::exception);
}

TEST(Results, CsvRoundTrip) {
  const auto rows = to_rows(run_experiment(small_dataset(), small_config(), "subj"));
  std::stringstream s;
  write_results_csv(s, rows);
  const auto back = read_results_csv(s);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].method, rows[i].method);
    EXPECT_EQ(back[i].criterion, rows[i].criterion);
    EXPECT_EQ(back[i].fold, rows[i].fold);
    EXPECT_DOUBLE_EQ(back[i].value, rows[i].value);
  }
}

TEST(Results, MalformedRowReportsLineNumber) {
  std::stringstream s;
  s << kResultsHeader << "\n"
    << "a,B,0,bac,0,0,0.5\n"
    << "a,B,zero,bac,1,0,0.5\n";
  try {
    read_results_csv(s, "r.csv");
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(Report, RankTableAndFiles) {
  const auto rows = to_rows(run_experiment(small_dataset(), small_config()));
  const auto table = rank_table(rows);
  EXPECT_EQ(table.size(), 3u * 2u);
  for (const auto& e : table) {
    EXPECT_EQ(e.cases, 2u);
    for (double r : e.summary.mean_rank) {
      EXPECT_GE(r, 1.0);
      EXPECT_LE(r, 4.0);
    }
  }
  const auto dir = temp_dir("report");
  const auto svgs = write_report(dir, rows, "NBG");
  ASSERT_EQ(svgs.size(), 3u);
  for (const auto& p : svgs) {
    std::ifstream in(p);
    const std::string svg((std::istreambuf_iterator<char>(in)), {});
    std::size_t series = 0;
    for (auto pos = svg.find("class=\"series\""); pos != std::string::npos; pos = svg.find("class=\"series\"", pos + 1))
      ++series;
    EXPECT_EQ(series, 4u);
  }
  EXPECT_TRUE(fs::exists(dir / "ranks.csv"));
  EXPECT_TRUE(fs::exists(dir / "significance.csv"));
}

TEST(Report, SingleMethodRanksAreOne) {
  auto cfg = small_config();
  cfg.methods = {Method::NBS};
  const auto table = rank_table(to_rows(run_experiment(small_dataset(), cfg)));
  for (const auto& e : table) EXPECT_EQ(e.summary.mean_rank, std::vector<double>{1.0});
}

TEST(Report, MissingOrDuplicateMethodThrows) {
  std::vector<ResultRow> rows{{"s", "B", 0, "bac", 0, 0, 0.5}, {"s", "EC", 0, "bac", 0, 0, 0.4},
                              {"s", "B", 0, "bac", 1, 0, 0.5}};
  EXPECT_THROW(rank_table(rows), std::runtime_error);
  rows.push_back({"s", "B", 0, "bac", 0, 0, 0.6});
  EXPECT_THROW(rank_table(rows), std::runtime_error);
}

class CascadeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto& ds = small_dataset();
    X = extract_feature_matrix(ds.windows);
    layout = FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel);
    OccOptions opt;
    opt.nu_grid = {0.2, 0.5};
    model = train_cascade(X, ds.labels(), layout, ds.class_count, {}, opt, 4);
  }
  Matrix X;
  FeatureLayout layout;
  CascadeModel model;
};

TEST_F(CascadeTest, JsonRoundTripPreservesDecisions) {
  const auto dir = temp_dir("cascade");
  save_cascade(dir / "m.json", model);
  const auto back = load_cascade(dir / "m.json");
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto x = as_feature_vector(X.row(i), layout);
    for (auto mode : {DecisionMode::Crisp, DecisionMode::Soft}) {
      const auto a = classify(model, x, mode);
      const auto b = classify(back, x, mode);
      EXPECT_EQ(a.label, b.label);
      for (std::size_t l = 0; l < a.contamination.size(); ++l) EXPECT_NEAR(a.contamination[l], b.contamination[l], 1e-12);
    }
  }
}

TEST_F(CascadeTest, RejectsForeignFiles) {
  const auto dir = temp_dir("cascade_bad");
  std::ofstream(dir / "x.json") << R"({"format": "other"})";
  EXPECT_THROW(load_cascade(dir / "x.json"), std::runtime_error);
}

TEST_F(CascadeTest, WindowClassificationIsFast) {
  const auto& w = small_dataset().windows.front();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 50; ++i) (void)classify(model, w, DecisionMode::Soft);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() / 50;
  EXPECT_LT(ms, 50.0);
}
