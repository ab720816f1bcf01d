#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "srpsbl/localize.hpp"

using namespace srpsbl;

namespace {

DoaEstimate estimate(double el, double az, double score = 1.0) {
  DoaEstimate e;
  e.elevation_deg = el;
  e.azimuth_deg = az;
  e.score = score;
  return e;
}

GridPoint point(double el, double az) { return {el, az, direction_from_angles(el, az)}; }

Vec3 random_direction(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace

TEST(GreatCircle, Examples) {
  EXPECT_NEAR(great_circle_angle(point(20, 40), point(20, 40)), 0.0, 1e-6);
  EXPECT_NEAR(great_circle_angle(point(0, 0), point(0, 10)), 10.0, 1e-12);
  EXPECT_NEAR(great_circle_angle(point(90, 37), point(0, 150)), 90.0, 1e-12);
  EXPECT_NEAR(great_circle_angle(point(0, 0), point(0, 180)), 180.0, 1e-12);
}

TEST(GreatCircle, IsAMetric) {
  std::mt19937 rng(51);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 a = random_direction(rng), b = random_direction(rng), c = random_direction(rng);
    const double ab = great_circle_angle(a, b);
    ASSERT_EQ(ab, great_circle_angle(b, a));
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, great_circle_angle(a, c) + great_circle_angle(c, b) + 1e-9);
    ASSERT_NEAR(great_circle_angle(a, a), 0.0, 1e-5);
  }
}

TEST(PickPeaks, IsolatedSpikesInWeightOrder) {
  const DoaGrid g = build_doa_grid(2.0, 2.0);
  VectorXd w = VectorXd::Zero(g.size());
  const int a = g.index(45, 30), b = g.index(50, 60), c = g.index(40, 70);
  w(a) = 2.0;
  w(b) = 5.0;
  w(c) = 1.0;
  const PeakSelection p = pick_peaks(w, g, 3, 3.0);
  ASSERT_EQ(p.estimates.size(), 3u);
  EXPECT_FALSE(p.shortfall);
  EXPECT_EQ(p.estimates[0].grid_index, b);
  EXPECT_EQ(p.estimates[1].grid_index, a);
  EXPECT_EQ(p.estimates[2].grid_index, c);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(p.estimates[static_cast<std::size_t>(i)].rank, i + 1);
  EXPECT_EQ(p.estimates[0].score, 5.0);
  EXPECT_EQ(p.estimates[0].elevation_deg, g[b].elevation_deg);
}

TEST(PickPeaks, SeparationRuleSkipsNearbyPoints) {
  const DoaGrid g = build_doa_grid(2.0, 2.0);
  VectorXd w = VectorXd::Zero(g.size());
  const int big = g.index(45, 45), near = g.index(45, 46), far = g.index(45, 48);
  w(big) = 3.0;
  w(near) = 2.0;  // 2 degrees away
  w(far) = 1.0;   // 6 degrees away
  const PeakSelection p = pick_peaks(w, g, 2, 3.0);
  ASSERT_EQ(p.estimates.size(), 2u);
  EXPECT_EQ(p.estimates[0].grid_index, big);
  EXPECT_EQ(p.estimates[1].grid_index, far);
}

TEST(PickPeaks, UniformMapTakesLowestIndex) {
  const DoaGrid g = build_doa_grid(15.0, 10.0);
  const PeakSelection p = pick_peaks(VectorXd::Ones(g.size()), g, 1, 3.0);
  ASSERT_EQ(p.estimates.size(), 1u);
  EXPECT_EQ(p.estimates[0].grid_index, 0);
  EXPECT_FALSE(p.shortfall);
}

TEST(PickPeaks, ShortfallWhenTheMapRunsOut) {
  const DoaGrid g = build_doa_grid(90.0, 90.0);  // 9 points, 5 distinct directions
  const PeakSelection p = pick_peaks(VectorXd::Ones(g.size()), g, 8, 60.0);
  EXPECT_TRUE(p.shortfall);
  EXPECT_LT(p.estimates.size(), 8u);
  VectorXd nan = VectorXd::Constant(g.size(), std::numeric_limits<double>::quiet_NaN());
  EXPECT_TRUE(pick_peaks(nan, g, 1, 0.0).shortfall);
}

TEST(PickPeaks, Errors) {
  const DoaGrid g = build_doa_grid(15.0, 10.0);
  EXPECT_THROW(pick_peaks(VectorXd::Ones(3), g, 1, 3.0), ConfigError);
  EXPECT_THROW(pick_peaks(VectorXd::Ones(g.size()), g, 0, 3.0), ConfigError);
  EXPECT_THROW(pick_peaks(VectorXd::Ones(g.size()), g, 1, -1.0), ConfigError);
}

TEST(PickPeaks, OutputRespectsSeparation) {
  std::mt19937 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const DoaGrid g = build_doa_grid(6.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd w(g.size());
    for (int i = 0; i < g.size(); ++i) w(i) = u(rng);
    const double sep = 30.0 * u(rng);
    const int n = 1 + static_cast<int>(10 * u(rng));
    const PeakSelection p = pick_peaks(w, g, n, sep);
    ASSERT_EQ(p.shortfall, static_cast<int>(p.estimates.size()) < n);
    for (std::size_t i = 0; i < p.estimates.size(); ++i) {
      if (i > 0) ASSERT_LE(p.estimates[i].score, p.estimates[i - 1].score);
      for (std::size_t j = 0; j < i; ++j) {
        ASSERT_GE(great_circle_angle(g[p.estimates[i].grid_index], g[p.estimates[j].grid_index]), sep);
      }
    }
  }
}

TEST(LocalizationErrorTest, Examples) {
  const std::vector<GridPoint> truths = {point(0, 0), point(0, 20)};
  EXPECT_NEAR(localization_error({estimate(0, 0), estimate(0, 20)}, truths).degrees, 0.0, 1e-6);
  EXPECT_NEAR(localization_error({estimate(0, 10)}, {point(0, 0)}).degrees, 10.0, 1e-9);
  // Nearest-truth matching does not penalise two estimates on one source.
  const LocalizationError dup = localization_error({estimate(0, 0), estimate(0, 0)}, truths);
  EXPECT_NEAR(dup.degrees, 0.0, 1e-6);
  EXPECT_FALSE(dup.shortfall);
  EXPECT_THROW(localization_error({estimate(0, 0)}, {}), DomainError);
}

TEST(LocalizationErrorTest, MissingEstimatesCostHalfACircle) {
  const std::vector<GridPoint> truths = {point(0, 0), point(0, 20), point(30, 90)};
  const LocalizationError le = localization_error({estimate(0, 10)}, truths);
  EXPECT_TRUE(le.shortfall);
  EXPECT_NEAR(le.degrees, (10.0 + 360.0) / 3.0, 1e-9);
}

TEST(LocalizationErrorTest, OrderInvariant) {
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> el(-90.0, 90.0), az(0.0, 180.0), score(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GridPoint> truths;
    std::vector<DoaEstimate> est;
    for (int j = 0; j < 3; ++j) {
      truths.push_back(point(el(rng), az(rng)));
      est.push_back(estimate(el(rng), az(rng), score(rng)));
    }
    const double base = localization_error(est, truths).degrees;
    std::shuffle(est.begin(), est.end(), rng);
    ASSERT_NEAR(localization_error(est, truths).degrees, base, 1e-12);
    std::shuffle(truths.begin(), truths.end(), rng);
    ASSERT_NEAR(localization_error(est, truths).degrees, base, 1e-12);
  }
}
