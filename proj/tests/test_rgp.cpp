#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rgpdkf/rgp.hpp"

using namespace rgpdkf;

namespace {

KernelPrecomp single_point(double sigma = 1.0) { return precompute(KernelSpec(1.0, sigma), GridSpec(1, 0.0, 1.0)); }

} // namespace

TEST(RgpNoise, Validation) {
  EXPECT_THROW(RgpNoise(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(RgpNoise(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(RgpNoise(0.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_NO_THROW(RgpNoise(0.0, INFINITY));
}

TEST(RgpInit, ZeroMeanPriorCovariance) {
  const auto pre = precompute(KernelSpec(2.0, 3.0), GridSpec(6, 0.0, 1.0));
  const RgpState s = rgp_init(pre);
  EXPECT_TRUE(s.mean.isZero(0.0));
  EXPECT_EQ(s.cov, pre.gram());
  EXPECT_EQ(s.step, 0u);
}

TEST(RgpInfer, PriorGivesZeroMeanAndSignalVariance) {
  const auto pre = precompute(KernelSpec(1.0, 2.5), GridSpec(9, -1.0, 1.0));
  const RgpState s = rgp_init(pre);
  for (double z = -1.3; z < 1.3; z += 0.1) {
    const auto inf = rgp_infer(s, z, pre);
    EXPECT_EQ(inf.mean, 0.0);
    EXPECT_NEAR(inf.variance, 6.25, 1e-12);
  }
}

TEST(RgpInfer, AtBasisPointReturnsStoredMoments) {
  const auto pre = precompute(KernelSpec(1.0, 1.0), GridSpec(5, 0.0, 4.0));
  std::mt19937_64 rng(3);
  RgpState s{oracle::random_vector(5, rng), oracle::random_spd(5, rng), 0};
  for (int i = 0; i < 5; ++i) {
    const auto inf = rgp_infer(s, static_cast<double>(i), pre);
    EXPECT_NEAR(inf.mean, s.mean(i), 1e-10);
    EXPECT_NEAR(inf.variance, s.cov(i, i), 1e-9);
  }
}

TEST(RgpInfer, WrongDimensionThrows) {
  const auto pre = precompute(KernelSpec(), GridSpec(5, 0.0, 4.0));
  RgpState s{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4), 0};
  EXPECT_THROW(rgp_infer(s, 0.0, pre), DimensionError);
}

TEST(RgpUpdate, ScalarHandComputed) {
  // sigma_K = 1, y = 2, sigma_y = 1: C_z^p = 1, G = 0.5.
  const auto pre = single_point();
  const RgpState s0 = rgp_init(pre);
  const auto inf = rgp_infer(s0, 0.0, pre);
  EXPECT_DOUBLE_EQ(inf.variance, 1.0);
  const RgpState s1 = rgp_update(s0, inf, 2.0, RgpNoise(0.0, 1.0));
  EXPECT_NEAR(s1.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(s1.cov(0, 0), 0.5, 1e-15);
  EXPECT_EQ(s1.step, 1u);
}

TEST(RgpUpdate, InfiniteMeasurementStdLeavesMeanUnchanged) {
  const auto pre = precompute(KernelSpec(), GridSpec(4, 0.0, 3.0));
  const RgpState s0 = rgp_init(pre);
  const auto s1 = rgp_update(s0, rgp_infer(s0, 1.2, pre), 50.0, RgpNoise(0.1, INFINITY));
  EXPECT_EQ(s1.mean, s0.mean);
  EXPECT_TRUE((s1.cov - s0.cov - 0.01 * Eigen::MatrixXd::Identity(4, 4)).isZero(1e-15));
}

TEST(RgpUpdate, RejectsNonFiniteMeasurement) {
  const auto pre = single_point();
  const RgpState s0 = rgp_init(pre);
  const auto inf = rgp_infer(s0, 0.0, pre);
  EXPECT_THROW(rgp_update(s0, inf, NAN, RgpNoise(0.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(rgp_update(s0, inf, INFINITY, RgpNoise(0.0, 1.0)), std::invalid_argument);
}

TEST(RgpUpdate, ConvergesToRiccatiFixedPoint) {
  const double q = 0.04;
  const double r = 0.25;
  const auto pre = single_point();
  RgpState s = rgp_init(pre);
  const RgpNoise noise(std::sqrt(q), std::sqrt(r));
  for (int i = 0; i < 500; ++i) s = rgp_update(s, rgp_infer(s, 0.0, pre), 0.3, noise);
  const double expected = 0.5 * (q + std::sqrt(q * q + 4.0 * q * r));
  EXPECT_NEAR(s.cov(0, 0), expected, 1e-12);
}

TEST(RgpUpdate, ZeroProcessNoiseVarianceDecreasesMonotonically) {
  const auto pre = precompute(KernelSpec(1.0, 1.0), GridSpec(11, -1.0, 1.0));
  RgpState s = rgp_init(pre);
  const RgpNoise noise(0.0, 0.3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double prev_trace = s.cov.trace();
  for (int i = 0; i < 300; ++i) {
    const double z = u(rng);
    s = rgp_update(s, rgp_infer(s, z, pre), std::sin(3.0 * z), noise);
    EXPECT_LE(s.cov.trace(), prev_trace + 1e-12);
    prev_trace = s.cov.trace();
  }
}

TEST(RgpUpdate, MatchesJosephFormOracle) {
  const auto pre = precompute(KernelSpec(1.5, 2.0), GridSpec(8, -2.0, 2.0));
  RgpState s = rgp_init(pre);
  Eigen::VectorXd mu = s.mean;
  Eigen::MatrixXd c = s.cov;
  const RgpNoise noise(0.0, 0.5);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.2, 2.2);
  for (int i = 0; i < 200; ++i) {
    const double z = u(rng);
    const double y = z * z - 1.0;
    const auto inf = rgp_infer(s, z, pre);
    const double offset = pre.spec().signal_variance() - (inf.weights * pre.gram() * inf.weights.transpose())(0, 0);
    s = rgp_update(s, inf, y, noise);
    oracle::joseph_update(mu, c, inf.weights, offset, 0.25, y);
  }
  EXPECT_LE((s.mean - mu).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LE((s.cov - c).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(RgpUpdate, LearnsSmoothFunction) {
  const auto pre = precompute(KernelSpec(1.0, 1.0), GridSpec(15, -3.0, 3.0));
  RgpState s = rgp_init(pre);
  const RgpNoise noise(0.0, 0.05);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const double z = u(rng);
    s = rgp_update(s, rgp_infer(s, z, pre), std::sin(z), noise);
  }
  for (double z = -2.8; z < 2.8; z += 0.2) EXPECT_NEAR(rgp_infer(s, z, pre).mean, std::sin(z), 0.02) << z;
}

TEST(BoundCovariance, CapsDiagonalAndStaysPsd) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd c = oracle::random_spd(6, rng, 0.01);
    const double bound = 0.5 * c.diagonal().maxCoeff();
    bound_covariance(c, bound);
    EXPECT_LE(c.diagonal().maxCoeff(), bound * (1.0 + 1e-14));
    EXPECT_GE(oracle::min_eigenvalue(c), -1e-12);
    EXPECT_TRUE(c.isApprox(c.transpose(), 1e-14));
  }
}

TEST(BoundCovariance, NoOpWhenBelowBound) {
  std::mt19937_64 rng(10);
  Eigen::MatrixXd c = oracle::random_spd(4, rng);
  const Eigen::MatrixXd before = c;
  bound_covariance(c, 2.0 * c.diagonal().maxCoeff());
  EXPECT_EQ(c, before);
}

TEST(RgpUpdate, CovarianceBoundIsApplied) {
  const auto pre = precompute(KernelSpec(1.0, 1.0), GridSpec(5, 0.0, 4.0));
  RgpState s = rgp_init(pre);
  const RgpNoise noise(1.0, 0.1, 1.2);
  for (int i = 0; i < 100; ++i) s = rgp_update(s, rgp_infer(s, 0.0, pre), 1.0, noise);
  EXPECT_LE(s.cov.diagonal().maxCoeff(), 1.2 * (1.0 + 1e-14));
  EXPECT_GE(oracle::min_eigenvalue(s.cov), -1e-12);
}
