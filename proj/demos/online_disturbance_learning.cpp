// Joint state estimation and disturbance learning on a damped pendulum whose
// torque disturbance depends on an external, measurable signal. Only the
// angle is measured; the GP learns z(zeta) through the filter.

#include <cmath>
#include <cstdio>
#include <random>

#include "rgpdkf/fusion.hpp"
#include "rgpdkf/metrics.hpp"

int main() {
  using namespace rgpdkf;
  static constexpr double dt = 0.01;
  auto hidden = [](double zeta) { return 1.5 * std::tanh(2.0 * zeta) - 0.5; };

  FunctionalPlant pendulum;
  pendulum.n_x = 2;
  pendulum.n_y = 1;
  pendulum.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) {
    Eigen::VectorXd next(2);
    next << x(0) + dt * x(1), x(1) + dt * (-4.0 * std::sin(x(0)) - 0.8 * x(1) + u(0) + z);
    return next;
  };
  pendulum.a = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, dt, -4.0 * dt * std::cos(x(0)), 1.0 - 0.8 * dt;
    return a;
  };
  pendulum.e = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return Eigen::VectorXd(Eigen::Vector2d(0.0, dt)); };
  pendulum.h = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x(0)); };
  pendulum.hx = [](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::RowVector2d(1.0, 0.0)); };

  const KernelPrecomp pre(KernelSpec(1.0, 2.0), GridSpec(9, -1.0, 1.0));
  const EkfNoise noise(Eigen::MatrixXd::Identity(2, 2) * 1e-8, Eigen::MatrixXd::Identity(1, 1) * 1e-4, 0.1);
  RgpDkf filter(pendulum, pre, noise, 0.0,
                make_fused_belief(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.1, pre));

  std::mt19937_64 rng(7);
  std::normal_distribution<double> meas(0.0, 0.01);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  for (int k = 0; k < 60000; ++k) {
    const double t = k * dt;
    const double zeta = std::sin(0.13 * t) * std::cos(0.031 * t);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, std::sin(0.7 * t));
    x = pendulum.f(x, u, hidden(zeta));
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, x(0) + meas(rng));
    filter.step(Eigen::VectorXd::Constant(1, zeta), u, y, /*train=*/true);
  }

  const auto sweep = snapshot_gp(filter.belief().gp_state(), pre, noise.residual_std(), -1.0, 1.0, 11);
  std::printf("%8s %10s %10s %10s\n", "zeta", "truth", "mean", "2sigma");
  for (const auto& p : sweep) std::printf("%8.2f %10.4f %10.4f %10.4f\n", p.zeta, hidden(p.zeta), p.mean, p.two_sigma);
}
