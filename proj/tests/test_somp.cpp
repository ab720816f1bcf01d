#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "srpsbl/sim.hpp"
#include "srpsbl/somp.hpp"
#include "test_support.hpp"

using namespace srpsbl;

TEST(Somp, OrthogonalDictionaryRecoversExactly) {
  std::mt19937 rng(41);
  const Eigen::HouseholderQR<MatrixXd> qr(testutil::gaussian_matrix(rng, 10, 10));
  const MatrixXd q = qr.householderQ();
  MatrixXd s = MatrixXd::Zero(10, 4);
  s.row(2) << 3.0, -1.0, 0.5, 2.0;
  s.row(7) << -0.5, 2.0, 1.0, 1.0;
  const SompResult r = somp(q * s, q, 5);
  ASSERT_EQ(r.support.size(), 2u);  // stops once the residual vanishes
  EXPECT_EQ(std::min(r.support[0], r.support[1]), 2);
  EXPECT_EQ(std::max(r.support[0], r.support[1]), 7);
  EXPECT_EQ(r.map.iterations, 2);
  EXPECT_LE(r.residual_norms.back(), 1e-10);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE((r.coefficients.row(static_cast<Eigen::Index>(i)) - s.row(r.support[i])).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_NEAR(r.map.weights(2), s.row(2).norm(), 1e-10);
  EXPECT_EQ(r.map.weights(0), 0.0);
}

TEST(Somp, ResidualNeverIncreases) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd d = testutil::gaussian_matrix(rng, 12, 40);
    const MatrixXd y = testutil::gaussian_matrix(rng, 12, 3);
    const SompResult r = somp(y, d, 10);
    ASSERT_EQ(r.residual_norms.size(), 11u);
    for (std::size_t i = 1; i < r.residual_norms.size(); ++i) {
      ASSERT_LT(r.residual_norms[i], r.residual_norms[i - 1]);
    }
    ASSERT_GE(r.map.weights.minCoeff(), 0.0);
  }
}

TEST(Somp, ZeroDataStopsImmediately) {
  std::mt19937 rng(43);
  const SompResult r = somp(MatrixXd::Zero(6, 2), testutil::gaussian_matrix(rng, 6, 9), 3);
  EXPECT_TRUE(r.support.empty());
  EXPECT_EQ(r.map.weights, VectorXd::Zero(9));
  EXPECT_EQ(r.residual_norms, std::vector<double>{0.0});
  EXPECT_EQ(r.map.iterations, 0);
}

TEST(Somp, MatchesBruteForceOnTwoRowFixtures) {
  std::mt19937 rng(44);
  std::uniform_int_distribution<int> pick(0, 19);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd d = testutil::gaussian_matrix(rng, 10, 20);
    const int q1 = pick(rng);
    int q2 = pick(rng);
    while (q2 == q1) q2 = pick(rng);
    MatrixXd s = MatrixXd::Zero(20, 5);
    s.row(q1) = testutil::gaussian_matrix(rng, 1, 5);
    s.row(q2) = testutil::gaussian_matrix(rng, 1, 5);
    const MatrixXd y = d * s;

    double best = 1e300;
    std::pair<int, int> arg;
    for (int a = 0; a < 20; ++a) {
      for (int b = a + 1; b < 20; ++b) {
        MatrixXd sub(10, 2);
        sub << d.col(a), d.col(b);
        const double res = (y - sub * sub.colPivHouseholderQr().solve(y)).norm();
        if (res < best) {
          best = res;
          arg = {a, b};
        }
      }
    }
    ASSERT_EQ(arg, std::make_pair(std::min(q1, q2), std::max(q1, q2)));

    SompResult r = somp(y, d, 2);
    std::sort(r.support.begin(), r.support.end());
    EXPECT_EQ(r.support, (std::vector<int>{arg.first, arg.second})) << "trial " << trial;
  }
}

TEST(Somp, Errors) {
  EXPECT_THROW(somp(MatrixXd::Ones(3, 1), MatrixXd::Ones(3, 4), 0), ConfigError);
  EXPECT_THROW(somp(MatrixXd::Ones(3, 1), MatrixXd::Ones(4, 4), 1), ConfigError);
  MatrixXd d = MatrixXd::Ones(3, 4);
  d.col(2).setZero();
  EXPECT_THROW(somp(MatrixXd::Ones(3, 1), d, 1), ConfigError);
}

// One atom on the averaged SRP map of a simulated source picks the true point.
TEST(Somp, SingleSimulatedSource) {
  const MicArray array = uma16_array();
  const DoaGrid coarse = build_doa_grid(15.0, 10.0);
  const DoaGrid fine = build_doa_grid(4.0, 4.0);
  const FrequencyBand band = make_band(300.0, 4000.0, 48000.0, 1024, 4);
  const DictionarySet dict = build_dictionary(array, coarse, fine, band);
  for (const auto& [ie, ia] : {std::pair{25, 10}, std::pair{30, 40}, std::pair{18, 22}}) {
    const int q = fine.index(ie, ia);
    Scenario sc;
    sc.sources = {{fine[q], {SignalKind::White}, 1.0}};
    sc.duration = 0.25;
    sc.snr_db.reset();
    const SrpTensor z = srp_tensor(whiten(stft(synthesize(sc)), array.pairs(), band), coarse, array);
    const SompResult r = somp(averaged_map(z), dict.band_average, 1);
    ASSERT_EQ(r.support.size(), 1u);
    EXPECT_EQ(r.support[0], q) << "elevation " << fine[q].elevation_deg << " azimuth "
                               << fine[q].azimuth_deg;
  }
}
