// Learns a 1-D function from noisy direct measurements with the recursive GP.

#include <cmath>
#include <cstdio>
#include <random>

#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"

int main() {
  using namespace rgpdkf;
  const KernelPrecomp pre(KernelSpec(1.0, 1.5), GridSpec(15, -3.0, 3.0));
  const RgpNoise noise(0.0, 0.1);
  RgpState gp = rgp_init(pre);

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> input(-3.0, 3.0);
  std::normal_distribution<double> meas(0.0, 0.1);
  auto hidden = [](double x) { return std::sin(x) + 0.2 * x; };

  for (int k = 0; k < 2000; ++k) {
    const double x = input(rng);
    const auto inf = rgp_infer(gp, x, pre);
    gp = rgp_update(gp, inf, hidden(x) + meas(rng), noise);
  }

  std::printf("%8s %10s %10s %10s\n", "x", "truth", "mean", "2sigma");
  for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.5) {
    const auto inf = rgp_infer(gp, x, pre);
    std::printf("%8.2f %10.4f %10.4f %10.4f\n", x, hidden(x), inf.mean, 2.0 * std::sqrt(std::max(inf.variance, 0.0)));
  }
}
