#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rgpdkf/baseline.hpp"
#include "rgpdkf/sim.hpp"

using namespace rgpdkf;

TEST(LinearPlant, Validation) {
  EXPECT_THROW(LinearPlant(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 1), Eigen::Vector2d::Zero(), 0.01),
               std::invalid_argument);
  EXPECT_THROW(LinearPlant(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 1), Eigen::Vector3d(0, 1, 0), 0.01),
               DimensionError);
  EXPECT_THROW(LinearPlant(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 1), Eigen::Vector2d(0, 1), 0.0),
               std::invalid_argument);
}

TEST(LinearPlant, PseudoInverseOfDisturbanceGain) {
  const LinearPlant p(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 1), Eigen::Vector2d(3.0, 4.0), 0.1);
  EXPECT_NEAR(p.e_pinv()(0), 3.0 / 25.0, 1e-16);
  EXPECT_NEAR(p.e_pinv()(1), 4.0 / 25.0, 1e-16);
  EXPECT_NEAR(p.e_pinv().dot(p.e()), 1.0, 1e-15);
}

TEST(DisturbanceMeasurement, ExactOnNoiselessEulerTrajectory) {
  const sim::BenchmarkPlant plant;
  const LinearPlant d = plant.discrete();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  Eigen::Vector2d x(0.2, -0.1);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const double zeta = uni(rng);
    const double u = uni(rng);
    const double z = sim::hidden_z(zeta);
    const Eigen::Vector2d x_next = sim::euler_step(x, u, z, plant);
    worst = std::max(worst, std::abs(disturbance_measurement(x_next, x, Eigen::VectorXd::Constant(1, u), d) - z));
    x = x_next;
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(DisturbanceMeasurement, NoiseVarianceMatchesClosedForm) {
  // v ~ N(0, s^2 I) on both samples: e+ (v' - A v) has variance
  // s^2 (1 + 16 T^2 + (1 - 4T)^2) / T^2 for the benchmark plant.
  const sim::BenchmarkPlant plant;
  const LinearPlant d = plant.discrete();
  const double s = 0.01;
  const double t = plant.sample_time;
  const double expected = s * s * (1.0 + 16.0 * t * t + (1.0 - 4.0 * t) * (1.0 - 4.0 * t)) / (t * t);
  sim::GaussianSource g(77);
  const Eigen::Vector2d x(0.3, 0.1);
  const Eigen::Vector2d x_next = sim::euler_step(x, 0.0, 2.0, plant);
  const int n = 200000;
  double acc = 0.0;
  double acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d y = x + s * Eigen::Vector2d(g(), g());
    const Eigen::Vector2d y_next = x_next + s * Eigen::Vector2d(g(), g());
    const double err = disturbance_measurement(y_next, y, Eigen::VectorXd::Zero(1), d) - 2.0;
    acc += err;
    acc2 += err * err;
  }
  EXPECT_NEAR(acc / n, 0.0, 5.0 * std::sqrt(expected / n));
  EXPECT_NEAR(acc2 / n, expected, 0.02 * expected);
}

TEST(RgpbStep, TrainsOnReconstructedDisturbance) {
  const sim::BenchmarkPlant plant;
  const LinearPlant d = plant.discrete();
  const auto pre = precompute(KernelSpec(1.0, 20.0), GridSpec(11, -1.5, 1.5));
  RgpState s = rgp_init(pre);
  const RgpNoise noise(0.0, 0.5);
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-1.2, 1.2);
  for (int k = 0; k < 3000; ++k) {
    const double zeta = uni(rng);
    const Eigen::Vector2d x_next = sim::euler_step(x, 0.0, sim::hidden_z(zeta), plant);
    const auto step = rgpb_step(s, pre, Eigen::VectorXd::Constant(1, zeta), x, x_next, Eigen::VectorXd::Zero(1), d,
                                noise);
    EXPECT_NEAR(step.y_gp, sim::hidden_z(zeta), 1e-9);
    s = step.state;
    x = x_next;
  }
  for (double zeta = -1.1; zeta < 1.1; zeta += 0.1) {
    EXPECT_NEAR(rgp_infer(s, zeta, pre).mean, sim::hidden_z(zeta), 0.1) << zeta;
  }
}
