#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "rgpdkf/error.hpp"
#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"

namespace rgpdkf {

/// Discrete linear plant x+ = A x + B u + e z used by the pseudo-inverse
/// baseline. Requires e != 0.
class LinearPlant {
public:
  LinearPlant(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::VectorXd e, double sample_time)
      : a_(std::move(a)), b_(std::move(b)), e_(std::move(e)), sample_time_(sample_time) {
    if (a_.rows() != a_.cols() || a_.rows() != e_.size() || (b_.size() > 0 && b_.rows() != a_.rows())) {
      throw DimensionError("LinearPlant: inconsistent matrix shapes");
    }
    const double ete = e_.squaredNorm();
    if (!(ete > 0.0)) {
      throw std::invalid_argument("LinearPlant: disturbance gain must be non-zero");
    }
    if (!(sample_time > 0.0)) {
      throw std::invalid_argument("LinearPlant: sample time must be positive");
    }
    e_pinv_ = e_.transpose() / ete;
  }

  [[nodiscard]] const Eigen::MatrixXd& a() const noexcept { return a_; }
  [[nodiscard]] const Eigen::MatrixXd& b() const noexcept { return b_; }
  [[nodiscard]] const Eigen::VectorXd& e() const noexcept { return e_; }
  [[nodiscard]] double sample_time() const noexcept { return sample_time_; }
  /// (e^T e)^-1 e^T
  [[nodiscard]] const Eigen::RowVectorXd& e_pinv() const noexcept { return e_pinv_; }

private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  Eigen::VectorXd e_;
  double sample_time_;
  Eigen::RowVectorXd e_pinv_;
};

/// Pseudo-measurement of z_k from two consecutive full-state measurements:
/// y_GP = e^+ (x_{k+1} - A x_k - B u_k).
inline double disturbance_measurement(const Eigen::Ref<const Eigen::VectorXd>& x_next,
                                      const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const Eigen::Ref<const Eigen::VectorXd>& u, const LinearPlant& plant) {
  if (x.size() != plant.a().rows() || x_next.size() != plant.a().rows()) {
    throw DimensionError("disturbance_measurement: state size does not match plant");
  }
  Eigen::VectorXd residual = x_next - plant.a() * x;
  if (plant.b().size() > 0) residual -= plant.b() * u;
  return plant.e_pinv().dot(residual);
}

struct BaselineStep {
  RgpState state;
  InferenceResult inference;
  double y_gp = 0.0;
};

/// RGP-B: reconstruct z_k from (x_k, x_{k+1}) and train the stand-alone RGP
/// at zeta_k. The measurement std is a tuning knob here, not a noise model.
inline BaselineStep rgpb_step(const RgpState& state, const KernelPrecomp& pre,
                              const Eigen::Ref<const Eigen::VectorXd>& zeta,
                              const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x_next,
                              const Eigen::Ref<const Eigen::VectorXd>& u, const LinearPlant& plant,
                              const RgpNoise& design_noise) {
  BaselineStep out;
  out.y_gp = disturbance_measurement(x_next, x, u, plant);
  out.inference = rgp_infer(state, zeta, pre);
  out.state = rgp_update(state, out.inference, out.y_gp, design_noise);
  return out;
}

} // namespace rgpdkf
