#include <gtest/gtest.h>

#include <emgcascade/occ.hpp>

#include "test_support.hpp"

using namespace emgcascade;

namespace {

Matrix cluster(Rng& rng, std::size_t n, std::size_t d, double sd = 1.0) {
  Matrix X(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) X(i, f) = sd * rng.normal();
  return X;
}

}  // namespace

TEST(UniformOutliers, MeanAndBounds) {
  Rng rng(1);
  const Bounds b(3, {0.0, 1.0});
  const auto O = generate_uniform_outliers(b, 1000, rng);
  for (std::size_t f = 0; f < 3; ++f) {
    double s = 0.0;
    for (std::size_t i = 0; i < O.rows(); ++i) {
      ASSERT_GE(O(i, f), 0.0);
      ASSERT_LE(O(i, f), 1.0);
      s += O(i, f);
    }
    EXPECT_NEAR(s / 1000.0, 0.5, 0.05);
  }
}

TEST(UniformOutliers, DegenerateDimensionIsConstant) {
  Rng rng(2);
  const auto O = generate_uniform_outliers({{2.0, 2.0}, {0.0, 1.0}}, 50, rng);
  for (std::size_t i = 0; i < O.rows(); ++i) EXPECT_EQ(O(i, 0), 2.0);
}

TEST(UniformOutliers, Reproducible) {
  Rng a(3), b(3);
  const Bounds bounds(2, {-1.0, 1.0});
  EXPECT_TRUE(generate_uniform_outliers(bounds, 10, a) == generate_uniform_outliers(bounds, 10, b));
}

TEST(FeatureBounds, TenPercentMargin) {
  const Matrix X(2, 1, std::vector<double>{0.0, 10.0});
  const auto b = feature_bounds(X);
  EXPECT_DOUBLE_EQ(b[0].first, -1.0);
  EXPECT_DOUBLE_EQ(b[0].second, 11.0);
}

TEST(TuneNu, WellClusteredDataPrefersSmallNu) {
  Rng gen(4);
  const Matrix X = cluster(gen, 200, 4, 0.3);
  Rng rng(5);
  const auto t = tune_nu(X, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, rng);
  EXPECT_LE(t.nu, 0.3);
  EXPECT_EQ(t.mean_bac.size(), 10u);
  // Calibration pool: every row once as a validation target plus as many outliers.
  EXPECT_EQ(t.calibration_scores.size(), 2 * X.rows());
}

TEST(TuneNu, SingleValueGrid) {
  Rng gen(6);
  const Matrix X = cluster(gen, 40, 2);
  Rng rng(7);
  const auto t = tune_nu(X, {0.35}, rng);
  EXPECT_EQ(t.nu, 0.35);
  EXPECT_EQ(t.model.nu, 0.35);
}

TEST(TuneNu, TiesGoToSmallerNu) {
  // Far-apart outlier box and tight targets: every nu in the grid scores BAC 1.
  Matrix X(0, 1);
  for (int i = 0; i < 40; ++i) X.append_row(std::vector<double>{i % 2 ? 0.0 : 1e-3});
  Rng rng(8);
  const auto t = tune_nu(X, {0.3, 0.2}, rng);
  // The grid comes back ascending; best score wins, ties go to the smaller nu.
  ASSERT_EQ(t.grid, (std::vector<double>{0.2, 0.3}));
  const double expected = t.mean_bac[1] > t.mean_bac[0] ? 0.3 : 0.2;
  EXPECT_EQ(t.nu, expected);
}

TEST(TuneNu, TooFewRowsThrows) {
  Rng rng(9);
  EXPECT_THROW(tune_nu(Matrix(7, 2, 1.0), {0.5}, rng), std::invalid_argument);
  EXPECT_THROW(tune_nu(Matrix(20, 2, 1.0), {}, rng), std::invalid_argument);
}

class EnsembleTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(10);
    layout = FeatureLayout::uniform(3, 2);
    X = cluster(rng, 300, 6, 1.0);
    OccOptions opt;
    opt.nu_grid = {0.05, 0.1};
    ens = train_occ_ensemble(X, layout, opt, 11);
  }
  FeatureLayout layout;
  Matrix X;
  OccEnsemble ens;
};

TEST_F(EnsembleTest, OneDetectorPerChannel) {
  ASSERT_EQ(ens.detectors.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(ens.detectors[l].channel, l);
    EXPECT_EQ(ens.detectors[l].model.dimension(), 2u);
  }
}

TEST_F(EnsembleTest, CentroidIsCleanInBothModes) {
  const FullFeatureVector centroid{std::vector<double>(6, 0.0), layout};
  for (double r : ensemble_predict(ens, centroid, DecisionMode::Crisp)) EXPECT_EQ(r, 1.0);
  for (double r : ensemble_predict(ens, centroid, DecisionMode::Soft)) EXPECT_GT(r, 0.5);
}

TEST_F(EnsembleTest, FarChannelIsFlagged) {
  std::vector<double> v(6, 0.0);
  v[2] = v[3] = 25.0;  // channel 1 far outside its training cloud
  const FullFeatureVector x{v, layout};
  const auto crisp = ensemble_predict(ens, x, DecisionMode::Crisp);
  EXPECT_EQ(crisp[0], 1.0);
  EXPECT_EQ(crisp[1], 0.0);
  EXPECT_EQ(crisp[2], 1.0);
  const auto soft = ensemble_predict(ens, x, DecisionMode::Soft);
  EXPECT_LT(soft[1], 0.5);
}

TEST_F(EnsembleTest, CrispIsIndicatorAndSoftIsMonotone) {
  Rng rng(12);
  for (int q = 0; q < 200; ++q) {
    std::vector<double> v(6);
    for (double& e : v) e = 3.0 * rng.normal();
    const FullFeatureVector x{v, layout};
    const auto crisp = ensemble_predict(ens, x, DecisionMode::Crisp);
    const auto soft = ensemble_predict(ens, x, DecisionMode::Soft);
    for (std::size_t l = 0; l < 3; ++l) {
      const double f = ens.detectors[l].model.decision(x.channel(l));
      EXPECT_EQ(crisp[l], f >= 0.0 ? 1.0 : 0.0);
      EXPECT_GE(soft[l], 0.0);
      EXPECT_LE(soft[l], 1.0);
    }
  }
  const auto& cal = ens.detectors[0].calibrator;
  EXPECT_GT(cal.a, 0.0);
  EXPECT_LT(cal(-0.01), cal(0.01));
}

TEST_F(EnsembleTest, LayoutMismatchThrows) {
  const FullFeatureVector x{std::vector<double>(6, 0.0), FeatureLayout::uniform(2, 3)};
  EXPECT_THROW(ensemble_predict(ens, x), std::invalid_argument);
}

TEST_F(EnsembleTest, SameSeedSameEnsemble) {
  OccOptions opt;
  opt.nu_grid = {0.05, 0.1};
  const auto again = train_occ_ensemble(X, layout, opt, 11);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(again.detectors[l].model.alphas, ens.detectors[l].model.alphas);
    EXPECT_EQ(again.detectors[l].calibrator.a, ens.detectors[l].calibrator.a);
  }
}
