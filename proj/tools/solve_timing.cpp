// Wall-clock cost of computing interpolation weights J = k(x, X) K^-1 by the
// QR solve used in the library versus multiplying with a stored inverse.
// Prints the ratio per grid size; the number depends on CPU and compiler.

#include <chrono>
#include <cstdio>
#include <vector>

#include "rgpdkf/kernel.hpp"

namespace {

template <typename F>
double seconds_per_call(F&& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f(i);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

} // namespace

int main() {
  using namespace rgpdkf;
  std::printf("%6s %14s %14s %8s\n", "N", "qr [us]", "inverse [us]", "ratio");
  for (std::size_t n : {5, 11, 25, 50, 100}) {
    const auto pre = precompute(KernelSpec(1.0, 1.0), GridSpec(n, -1.5, 1.5));
    const Eigen::MatrixXd inv = pre.gram().inverse();
    std::vector<Eigen::RowVectorXd> rows;
    for (int i = 0; i < 64; ++i) {
      rows.push_back(pre.kernel_row(Eigen::VectorXd::Constant(1, static_cast<double>(n - 1) * i / 63.0)));
    }
    const int reps = 200000 / static_cast<int>(n);
    double sink = 0.0;
    const double t_qr = seconds_per_call([&](int i) { sink += solve_against_gram(rows[i % 64], pre)(0); }, reps);
    const double t_inv = seconds_per_call([&](int i) { sink += (rows[i % 64] * inv)(0); }, reps);
    std::printf("%6zu %14.3f %14.3f %8.2f\n", n, 1e6 * t_qr, 1e6 * t_inv, t_qr / t_inv);
    if (sink == 42.0) std::puts("");
  }
}
