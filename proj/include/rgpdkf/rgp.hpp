#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "rgpdkf/error.hpp"
#include "rgpdkf/kernel.hpp"

namespace rgpdkf {

/// Mean and covariance of the GP at the basis points.
struct RgpState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t step = 0;
};

class RgpNoise {
public:
  RgpNoise() = default;

  RgpNoise(double process_std, double measurement_std, std::optional<double> cov_bound = std::nullopt)
      : process_std_(process_std), measurement_std_(measurement_std), cov_bound_(cov_bound) {
    if (!(process_std >= 0.0) || !std::isfinite(process_std)) {
      throw std::invalid_argument("RgpNoise: process std must be non-negative and finite");
    }
    // Infinity is accepted: it switches learning off (zero gain).
    if (!(measurement_std > 0.0)) {
      throw std::invalid_argument("RgpNoise: measurement std must be positive");
    }
    if (cov_bound && !(*cov_bound > 0.0)) {
      throw std::invalid_argument("RgpNoise: covariance bound must be positive");
    }
  }

  [[nodiscard]] double process_std() const noexcept { return process_std_; }
  [[nodiscard]] double measurement_std() const noexcept { return measurement_std_; }
  [[nodiscard]] const std::optional<double>& cov_bound() const noexcept { return cov_bound_; }

private:
  double process_std_ = 0.0;
  double measurement_std_ = 1.0;
  std::optional<double> cov_bound_;
};

/// GP prediction at one test input.
struct InferenceResult {
  Eigen::RowVectorXd weights; // J_k
  double mean = 0.0;          // mu_z^p
  double variance = 0.0;      // C_z^p
};

inline RgpState rgp_init(const KernelPrecomp& pre) {
  return RgpState{Eigen::VectorXd::Zero(pre.size()), pre.gram(), 0};
}

/// Prediction from raw mean/covariance blocks; shared by the stand-alone RGP
/// and the fused filter, whose GP block lives inside a larger belief.
template <typename MeanT, typename CovT>
InferenceResult gp_infer(const Eigen::MatrixBase<MeanT>& mean, const Eigen::MatrixBase<CovT>& cov,
                         const Eigen::Ref<const Eigen::VectorXd>& zeta, const KernelPrecomp& pre) {
  if (mean.size() != pre.size() || cov.rows() != pre.size() || cov.cols() != pre.size()) {
    throw DimensionError("gp_infer: GP block does not match basis count");
  }
  InferenceResult out;
  out.weights = solve_against_gram(pre.kernel_row(normalize(zeta, pre.grid())), pre);
  out.mean = out.weights.dot(mean.transpose());
  out.variance = pre.spec().signal_variance() +
                 (out.weights * (cov - pre.gram()) * out.weights.transpose())(0, 0);
  return out;
}

inline InferenceResult rgp_infer(const RgpState& state, const Eigen::Ref<const Eigen::VectorXd>& zeta,
                                 const KernelPrecomp& pre) {
  return gp_infer(state.mean, state.cov, zeta, pre);
}

inline InferenceResult rgp_infer(const RgpState& state, double zeta, const KernelPrecomp& pre) {
  return rgp_infer(state, Eigen::VectorXd::Constant(1, zeta), pre);
}

inline void symmetrize(Eigen::MatrixXd& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

/// Caps diag(C) at `bound`. Rows and columns of capped entries are scaled by
/// sqrt(bound / C_ii), a congruence transform, so the result stays PSD.
inline void bound_covariance(Eigen::MatrixXd& cov, double bound) {
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(cov.rows());
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (cov(i, i) > bound) scale(i) = std::sqrt(bound / cov(i, i));
  }
  cov = scale.asDiagonal() * cov * scale.asDiagonal();
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (scale(i) < 1.0) cov(i, i) = bound;
  }
}

inline RgpState rgp_update(const RgpState& state, const InferenceResult& inf, double y_gp,
                           const RgpNoise& noise) {
  if (!std::isfinite(y_gp)) {
    throw std::invalid_argument("rgp_update: non-finite measurement");
  }
  if (inf.weights.size() != state.mean.size()) {
    throw DimensionError("rgp_update: inference weights do not match state");
  }
  RgpState next = state;
  ++next.step;
  if (std::isinf(noise.measurement_std())) {
    next.cov.diagonal().array() += noise.process_std() * noise.process_std();
    return next;
  }
  const double innovation_var = inf.variance + noise.measurement_std() * noise.measurement_std();
  if (!(innovation_var > 0.0)) {
    throw SingularSystemError("rgp_update: non-positive innovation variance");
  }
  const Eigen::VectorXd cov_jt = state.cov * inf.weights.transpose();
  const Eigen::VectorXd gain = cov_jt / innovation_var;
  next.mean += gain * (y_gp - inf.mean);
  // G J C = G (C J^T)^T for symmetric C
  next.cov -= gain * cov_jt.transpose();
  next.cov.diagonal().array() += noise.process_std() * noise.process_std();
  symmetrize(next.cov);
  if (noise.cov_bound()) bound_covariance(next.cov, *noise.cov_bound());
  return next;
}

} // namespace rgpdkf
