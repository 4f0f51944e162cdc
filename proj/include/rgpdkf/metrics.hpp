#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"
#include "rgpdkf/sim.hpp"

namespace rgpdkf {

/// sqrt(mean((pred - truth)^2))
inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("rmse: series lengths differ");
  if (pred.empty()) throw std::invalid_argument("rmse: empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

/// Mean Gaussian negative log likelihood of `truth` under N(mean, var).
inline double nll(std::span<const double> mean, std::span<const double> var, std::span<const double> truth) {
  if (mean.size() != var.size() || mean.size() != truth.size()) {
    throw std::invalid_argument("nll: series lengths differ");
  }
  if (mean.empty()) throw std::invalid_argument("nll: empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(var[i] > 0.0)) throw std::invalid_argument("nll: variances must be positive");
    const double d = truth[i] - mean[i];
    acc += 0.5 * std::log(2.0 * std::numbers::pi * var[i]) + d * d / (2.0 * var[i]);
  }
  return acc / static_cast<double>(mean.size());
}

struct CellMetrics {
  double rmse = 0.0;
  double nll = 0.0;
  double state_rmse = 0.0; // auxiliary, NaN when the estimator has no state
  std::size_t samples = 0;
};

/// Metrics of the GP disturbance prediction over all steps with t >= warmup.
/// NLL uses the sigma_r-inflated variance.
inline CellMetrics evaluate(const sim::RunRecord& rec, double warmup) {
  std::vector<double> mean, var, truth, xs_err, zeros;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec.time[k] < warmup) continue;
    mean.push_back(rec.gp_mean[k]);
    var.push_back(rec.gp_var_inflated[k]);
    truth.push_back(rec.z_true[k]);
    xs_err.push_back((rec.x_est[k] - rec.x_true[k]).norm());
  }
  if (mean.empty()) throw std::invalid_argument("evaluate: no samples after warm-up");
  CellMetrics m;
  m.rmse = rmse(mean, truth);
  m.nll = nll(mean, var, truth);
  zeros.assign(xs_err.size(), 0.0);
  m.state_rmse = rmse(xs_err, zeros);
  m.samples = mean.size();
  return m;
}

/// One row of a GP sweep table.
struct SweepPoint {
  double zeta = 0.0;
  double mean = 0.0;
  double two_sigma = 0.0; // 2 sqrt(C_z^p + sigma_r^2)
};

/// Dense sweep of GP predictions over [lo, hi] with `resolution` points.
inline std::vector<SweepPoint> snapshot_gp(const RgpState& gp, const KernelPrecomp& pre, double residual_std,
                                           double lo, double hi, std::size_t resolution) {
  if (resolution < 2 || !(hi > lo)) throw std::invalid_argument("snapshot_gp: need resolution >= 2 and hi > lo");
  std::vector<SweepPoint> out;
  out.reserve(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double zeta = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    const InferenceResult inf = rgp_infer(gp, zeta, pre);
    const double var = std::max(inf.variance, 0.0) + residual_std * residual_std;
    out.push_back({zeta, inf.mean, 2.0 * std::sqrt(var)});
  }
  return out;
}

struct SweepScore {
  double rmse = 0.0;
  double coverage = 0.0; // fraction of points with |z - mean| <= 2 sigma
};

template <typename Truth>
SweepScore score_sweep(std::span<const SweepPoint> sweep, Truth&& truth) {
  if (sweep.empty()) throw std::invalid_argument("score_sweep: empty sweep");
  double acc = 0.0;
  std::size_t inside = 0;
  for (const auto& p : sweep) {
    const double d = truth(p.zeta) - p.mean;
    acc += d * d;
    if (std::abs(d) <= p.two_sigma) ++inside;
  }
  const auto n = static_cast<double>(sweep.size());
  return {std::sqrt(acc / n), static_cast<double>(inside) / n};
}

} // namespace rgpdkf
