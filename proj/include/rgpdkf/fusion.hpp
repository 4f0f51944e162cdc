#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "rgpdkf/error.hpp"
#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"

namespace rgpdkf {

/// Discrete-time plant x_{k+1} = f(x_k, u_k, z_k), y_k = h(x_k) with a single
/// scalar disturbance z and the linearizations the filter needs.
template <typename M>
concept PlantModel = requires(const M& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) {
  { m.state_dim() } -> std::convertible_to<Eigen::Index>;
  { m.output_dim() } -> std::convertible_to<Eigen::Index>;
  { m.dynamics(x, u, z) } -> std::convertible_to<Eigen::VectorXd>;
  { m.output(x) } -> std::convertible_to<Eigen::VectorXd>;
  { m.state_jacobian(x, u, z) } -> std::convertible_to<Eigen::MatrixXd>;
  { m.disturbance_gain(x, u, z) } -> std::convertible_to<Eigen::VectorXd>;
  { m.output_jacobian(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Type-erased PlantModel built from callables.
struct FunctionalPlant {
  using Dynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;
  using StateJac = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;
  using Output = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using OutputJac = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  Eigen::Index n_x = 0;
  Eigen::Index n_y = 0;
  Dynamics f;
  Output h;
  StateJac a;
  Dynamics e;
  OutputJac hx;

  [[nodiscard]] Eigen::Index state_dim() const { return n_x; }
  [[nodiscard]] Eigen::Index output_dim() const { return n_y; }
  [[nodiscard]] Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) const {
    return f(x, u, z);
  }
  [[nodiscard]] Eigen::VectorXd output(const Eigen::VectorXd& x) const { return h(x); }
  [[nodiscard]] Eigen::MatrixXd state_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) const {
    return a(x, u, z);
  }
  [[nodiscard]] Eigen::VectorXd disturbance_gain(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) const {
    return e(x, u, z);
  }
  [[nodiscard]] Eigen::MatrixXd output_jacobian(const Eigen::VectorXd& x) const { return hx(x); }
};

static_assert(PlantModel<FunctionalPlant>);

/// Linear time-invariant plant x+ = A x + B u + e z, y = H x.
struct LinearModel {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd e;
  Eigen::MatrixXd h;

  [[nodiscard]] Eigen::Index state_dim() const { return a.rows(); }
  [[nodiscard]] Eigen::Index output_dim() const { return h.rows(); }
  [[nodiscard]] Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double z) const {
    Eigen::VectorXd next = a * x + e * z;
    if (b.size() > 0) next += b * u;
    return next;
  }
  [[nodiscard]] Eigen::VectorXd output(const Eigen::VectorXd& x) const { return h * x; }
  [[nodiscard]] Eigen::MatrixXd state_jacobian(const Eigen::VectorXd&, const Eigen::VectorXd&, double) const {
    return a;
  }
  [[nodiscard]] Eigen::VectorXd disturbance_gain(const Eigen::VectorXd&, const Eigen::VectorXd&, double) const {
    return e;
  }
  [[nodiscard]] Eigen::MatrixXd output_jacobian(const Eigen::VectorXd&) const { return h; }
};

static_assert(PlantModel<LinearModel>);

/// Filter noise: state process covariance, measurement covariance, and the
/// residual floor sigma_r added to every GP prediction variance.
class EkfNoise {
public:
  EkfNoise() = default;

  EkfNoise(Eigen::MatrixXd process, Eigen::MatrixXd measurement, double residual_std)
      : process_(std::move(process)), measurement_(std::move(measurement)), residual_std_(residual_std) {
    if (process_.rows() != process_.cols() || measurement_.rows() != measurement_.cols()) {
      throw DimensionError("EkfNoise: covariances must be square");
    }
    if (!process_.isApprox(process_.transpose(), 1e-12) && process_.norm() > 0.0) {
      throw std::invalid_argument("EkfNoise: process covariance must be symmetric");
    }
    if (!measurement_.isApprox(measurement_.transpose(), 1e-12)) {
      throw std::invalid_argument("EkfNoise: measurement covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eig(process_, Eigen::EigenvaluesOnly);
    if (process_.size() > 0 && q_eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, process_.norm())) {
      throw std::invalid_argument("EkfNoise: process covariance must be PSD");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> r_eig(measurement_, Eigen::EigenvaluesOnly);
    if (measurement_.size() == 0 || !(r_eig.eigenvalues().minCoeff() > 0.0)) {
      throw std::invalid_argument("EkfNoise: measurement covariance must be positive definite");
    }
    if (!(residual_std >= 0.0) || !std::isfinite(residual_std)) {
      throw std::invalid_argument("EkfNoise: residual std must be non-negative and finite");
    }
  }

  [[nodiscard]] const Eigen::MatrixXd& process() const noexcept { return process_; }
  [[nodiscard]] const Eigen::MatrixXd& measurement() const noexcept { return measurement_; }
  [[nodiscard]] double residual_std() const noexcept { return residual_std_; }
  [[nodiscard]] double residual_variance() const noexcept { return residual_std_ * residual_std_; }

private:
  Eigen::MatrixXd process_;
  Eigen::MatrixXd measurement_;
  double residual_std_ = 0.0;
};

/// Gaussian belief over the physical states only.
struct StateBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Joint belief over [x; GP basis values].
struct FusedBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::Index n_x = 0;
  std::size_t step = 0;

  [[nodiscard]] Eigen::Index gp_dim() const { return mean.size() - n_x; }
  [[nodiscard]] auto state_mean() const { return mean.head(n_x); }
  [[nodiscard]] auto gp_mean() const { return mean.tail(gp_dim()); }
  [[nodiscard]] auto state_cov() const { return cov.topLeftCorner(n_x, n_x); }
  [[nodiscard]] auto gp_cov() const { return cov.bottomRightCorner(gp_dim(), gp_dim()); }
  [[nodiscard]] auto cross_cov() const { return cov.topRightCorner(n_x, gp_dim()); }

  [[nodiscard]] RgpState gp_state() const { return RgpState{gp_mean(), gp_cov(), step}; }
};

/// mu_0 = [x0; 0], C_0 = blockdiag(C_x0, K).
inline FusedBelief make_fused_belief(const Eigen::VectorXd& x0, const Eigen::MatrixXd& cov_x0,
                                     const KernelPrecomp& pre) {
  if (cov_x0.rows() != x0.size() || cov_x0.cols() != x0.size()) {
    throw DimensionError("make_fused_belief: state covariance does not match state");
  }
  const Eigen::Index n_x = x0.size();
  const Eigen::Index n = n_x + pre.size();
  FusedBelief b;
  b.n_x = n_x;
  b.mean = Eigen::VectorXd::Zero(n);
  b.mean.head(n_x) = x0;
  b.cov = Eigen::MatrixXd::Zero(n, n);
  b.cov.topLeftCorner(n_x, n_x) = cov_x0;
  b.cov.bottomRightCorner(pre.size(), pre.size()) = pre.gram();
  return b;
}

namespace detail {

inline Eigen::VectorXd as_input(double u) { return Eigen::VectorXd::Constant(1, u); }

template <PlantModel M>
void check_model_output(const M& model, const Eigen::MatrixXd& h, const EkfNoise& noise) {
  if (h.rows() != model.output_dim() || h.cols() != model.state_dim()) {
    throw DimensionError("output Jacobian has wrong shape");
  }
  if (noise.measurement().rows() != model.output_dim()) {
    throw DimensionError("measurement covariance does not match output dimension");
  }
}

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw std::domain_error(std::string(what) + " is not finite");
}

} // namespace detail

struct PurePrediction {
  StateBelief belief;
  InferenceResult inference;
  double inflated_variance = 0.0; // C_z^p + sigma_r^2
};

/// Feedforward use of a frozen GP: the prediction enters the EKF as a noisy
/// input with variance C_z^p + sigma_r^2. The GP is not trained.
template <PlantModel M>
PurePrediction pure_predict(const StateBelief& belief, const RgpState& gp, const KernelPrecomp& pre,
                            const Eigen::Ref<const Eigen::VectorXd>& zeta, const Eigen::VectorXd& u,
                            const M& model, const EkfNoise& noise) {
  const Eigen::Index n_x = model.state_dim();
  if (belief.mean.size() != n_x || belief.cov.rows() != n_x || noise.process().rows() != n_x) {
    throw DimensionError("pure_predict: belief, model and noise dimensions disagree");
  }
  PurePrediction out;
  out.inference = rgp_infer(gp, zeta, pre);
  out.inflated_variance = out.inference.variance + noise.residual_variance();

  const Eigen::MatrixXd a = model.state_jacobian(belief.mean, u, out.inference.mean);
  const Eigen::VectorXd e = model.disturbance_gain(belief.mean, u, out.inference.mean);
  detail::check_finite(a, "state Jacobian");
  detail::check_finite(e, "disturbance gain");

  out.belief.mean = model.dynamics(belief.mean, u, out.inference.mean);
  out.belief.cov = a * belief.cov * a.transpose() + noise.process() + e * out.inflated_variance * e.transpose();
  return out;
}

struct StateUpdate {
  StateBelief belief;
  Eigen::VectorXd innovation;
};

/// Standard EKF correction. The innovation covariance is factorized with
/// LDLT rather than inverted.
template <PlantModel M>
StateUpdate pure_update(const StateBelief& pred, const Eigen::VectorXd& y, const M& model, const EkfNoise& noise) {
  const Eigen::MatrixXd h = model.output_jacobian(pred.mean);
  detail::check_model_output(model, h, noise);
  if (y.size() != model.output_dim()) throw DimensionError("pure_update: measurement has wrong size");

  StateUpdate out;
  out.innovation = y - model.output(pred.mean);
  const Eigen::MatrixXd ph = pred.cov * h.transpose();
  const Eigen::MatrixXd s = h * ph + noise.measurement();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) {
    throw SingularSystemError("pure_update: innovation covariance is not positive definite");
  }
  // G = P H^T S^-1  <=>  G^T = S^-1 H P
  const Eigen::MatrixXd gain = ldlt.solve(ph.transpose()).transpose();
  out.belief.mean = pred.mean + gain * out.innovation;
  out.belief.cov = pred.cov - gain * ph.transpose();
  symmetrize(out.belief.cov);
  return out;
}

struct FusedPrediction {
  FusedBelief belief;
  InferenceResult inference;      // evaluated on the GP block before prediction
  double input_variance = 0.0;    // sigma_K^2 - J K J^T + sigma_r^2
};

/// Joint prediction of states and GP basis values.
///
/// Linearization is taken at (mu_x, mu_z^p, u) of the current belief. With
/// A~ = [[A, e J], [0, I]] and e~ = [e; 0]:
///   C+ = A~ C A~^T + Q + e~ (sigma_K^2 - J K J^T + sigma_r^2) e~^T,
/// Q = blockdiag(Q_x, sigma_p^2 I). The GP mean is carried over unchanged.
template <PlantModel M>
FusedPrediction fused_predict(const FusedBelief& belief, const KernelPrecomp& pre,
                              const Eigen::Ref<const Eigen::VectorXd>& zeta, const Eigen::VectorXd& u,
                              const M& model, const EkfNoise& noise, double gp_process_std) {
  const Eigen::Index n_x = belief.n_x;
  const Eigen::Index n_g = pre.size();
  if (n_x != model.state_dim() || belief.mean.size() != n_x + n_g || belief.cov.rows() != n_x + n_g ||
      belief.cov.cols() != n_x + n_g || noise.process().rows() != n_x) {
    throw DimensionError("fused_predict: belief, model, grid and noise dimensions disagree");
  }

  FusedPrediction out;
  out.inference = gp_infer(belief.gp_mean(), belief.gp_cov(), zeta, pre);
  const Eigen::RowVectorXd& j = out.inference.weights;

  const Eigen::VectorXd mu_x = belief.state_mean();
  const Eigen::MatrixXd a = model.state_jacobian(mu_x, u, out.inference.mean);
  const Eigen::VectorXd e = model.disturbance_gain(mu_x, u, out.inference.mean);
  detail::check_finite(a, "state Jacobian");
  detail::check_finite(e, "disturbance gain");
  if (a.rows() != n_x || a.cols() != n_x || e.size() != n_x) {
    throw DimensionError("fused_predict: Jacobian shapes do not match state dimension");
  }

  out.input_variance = pre.spec().signal_variance() - (j * pre.gram() * j.transpose())(0, 0) +
                       noise.residual_variance();

  // Only the state rows of A~ differ from identity, so C+ is assembled
  // blockwise instead of forming the full extended matrix.
  const Eigen::MatrixXd& c = belief.cov;
  Eigen::MatrixXd top(n_x, n_x + n_g); // [A, eJ] * C
  top.noalias() = a * c.topRows(n_x);
  top.noalias() += e * (j * c.bottomRows(n_g));

  FusedBelief& next = out.belief;
  next.n_x = n_x;
  next.step = belief.step + 1;
  next.mean = belief.mean;
  next.mean.head(n_x) = model.dynamics(mu_x, u, out.inference.mean);

  next.cov.resize(n_x + n_g, n_x + n_g);
  // state-state: [A, eJ] C [A, eJ]^T
  next.cov.topLeftCorner(n_x, n_x).noalias() = top.leftCols(n_x) * a.transpose();
  next.cov.topLeftCorner(n_x, n_x).noalias() += (top.rightCols(n_g) * j.transpose()) * e.transpose();
  // state-GP: [A, eJ] C [0, I]^T
  next.cov.topRightCorner(n_x, n_g) = top.rightCols(n_g);
  next.cov.bottomLeftCorner(n_g, n_x) = top.rightCols(n_g).transpose();
  next.cov.bottomRightCorner(n_g, n_g) = c.bottomRightCorner(n_g, n_g);

  next.cov.topLeftCorner(n_x, n_x) += noise.process() + e * out.input_variance * e.transpose();
  next.cov.diagonal().tail(n_g).array() += gp_process_std * gp_process_std;
  symmetrize(next.cov);
  return out;
}

struct FusedUpdate {
  FusedBelief belief;
  Eigen::VectorXd innovation;
};

namespace detail {

inline Eigen::LDLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& s, const char* who) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) {
    throw SingularSystemError(std::string(who) + ": innovation covariance is not positive definite");
  }
  return ldlt;
}

} // namespace detail

/// Joint correction of states and GP (H~ = [H, 0]). The GP block learns
/// through the state-GP cross covariance.
template <PlantModel M>
FusedUpdate fused_update_4a(const FusedBelief& pred, const Eigen::VectorXd& y, const M& model, const EkfNoise& noise) {
  const Eigen::Index n_x = pred.n_x;
  const Eigen::VectorXd mu_x = pred.state_mean();
  const Eigen::MatrixXd h = model.output_jacobian(mu_x);
  detail::check_model_output(model, h, noise);
  if (y.size() != model.output_dim()) throw DimensionError("fused_update_4a: measurement has wrong size");

  FusedUpdate out;
  out.innovation = y - model.output(mu_x);
  const Eigen::MatrixXd cht = pred.cov.leftCols(n_x) * h.transpose(); // C H~^T
  const Eigen::MatrixXd s = h * cht.topRows(n_x) + noise.measurement();
  const auto ldlt = detail::factor_innovation(s, "fused_update_4a");
  const Eigen::MatrixXd gain = ldlt.solve(cht.transpose()).transpose();

  out.belief = pred;
  out.belief.mean += gain * out.innovation;
  out.belief.cov.noalias() -= gain * cht.transpose();
  symmetrize(out.belief.cov);
  return out;
}

/// State-only correction: the gain is computed from the state block and the
/// GP rows of the gain are zero, so the GP mean and GP-GP covariance stay
/// untouched. The state-GP cross block is corrected consistently,
/// C_xg <- (I - G H) C_xg, which keeps the joint covariance PSD.
template <PlantModel M>
FusedUpdate fused_update_4b(const FusedBelief& pred, const Eigen::VectorXd& y, const M& model, const EkfNoise& noise) {
  const Eigen::Index n_x = pred.n_x;
  const Eigen::Index n_g = pred.gp_dim();
  const Eigen::VectorXd mu_x = pred.state_mean();
  const Eigen::MatrixXd h = model.output_jacobian(mu_x);
  detail::check_model_output(model, h, noise);
  if (y.size() != model.output_dim()) throw DimensionError("fused_update_4b: measurement has wrong size");

  FusedUpdate out;
  out.innovation = y - model.output(mu_x);
  const Eigen::MatrixXd pxx = pred.state_cov();
  const Eigen::MatrixXd ph = pxx * h.transpose();
  const Eigen::MatrixXd s = h * ph + noise.measurement();
  const auto ldlt = detail::factor_innovation(s, "fused_update_4b");
  const Eigen::MatrixXd gain = ldlt.solve(ph.transpose()).transpose();

  out.belief = pred;
  out.belief.mean.head(n_x) += gain * out.innovation;
  out.belief.cov.topLeftCorner(n_x, n_x).noalias() -= gain * ph.transpose();
  const Eigen::MatrixXd cross = pred.cov.topRightCorner(n_x, n_g) - gain * (h * pred.cov.topRightCorner(n_x, n_g));
  out.belief.cov.topRightCorner(n_x, n_g) = cross;
  out.belief.cov.bottomLeftCorner(n_g, n_x) = cross.transpose();
  symmetrize(out.belief.cov);
  return out;
}

/// Per-step record emitted by the filters.
struct StepLog {
  std::size_t k = 0;
  Eigen::VectorXd state_mean;
  Eigen::VectorXd state_var;
  double gp_mean = 0.0;          // mu_z^p at zeta_k
  double gp_var = 0.0;           // C_z^p
  double gp_var_inflated = 0.0;  // C_z^p + sigma_r^2
  Eigen::VectorXd innovation;
  bool train = true;
};

/// RGP-dKF: EKF over [x; GP basis values] that learns the disturbance map
/// from indirect measurements of the plant.
template <PlantModel M>
class RgpDkf {
public:
  RgpDkf(M model, const KernelPrecomp& pre, EkfNoise noise, double gp_process_std, FusedBelief initial)
      : model_(std::move(model)), pre_(&pre), noise_(std::move(noise)), gp_process_std_(gp_process_std),
        belief_(std::move(initial)) {
    if (!(gp_process_std >= 0.0)) throw std::invalid_argument("RgpDkf: GP process std must be non-negative");
    if (belief_.n_x != model_.state_dim() || belief_.gp_dim() != pre.size()) {
      throw DimensionError("RgpDkf: initial belief does not match model and grid");
    }
  }

  /// Inference at zeta_k, prediction to k+1 with input u_k, then correction
  /// with y_{k+1}: joint (train) or state-only (!train).
  StepLog step(const Eigen::Ref<const Eigen::VectorXd>& zeta, const Eigen::VectorXd& u, const Eigen::VectorXd& y,
               bool train) {
    auto pred = fused_predict(belief_, *pre_, zeta, u, model_, noise_, gp_process_std_);
    auto upd = train ? fused_update_4a(pred.belief, y, model_, noise_)
                     : fused_update_4b(pred.belief, y, model_, noise_);
    belief_ = std::move(upd.belief);

    StepLog log;
    log.k = belief_.step;
    log.state_mean = belief_.state_mean();
    log.state_var = belief_.state_cov().diagonal();
    log.gp_mean = pred.inference.mean;
    log.gp_var = pred.inference.variance;
    log.gp_var_inflated = pred.inference.variance + noise_.residual_variance();
    log.innovation = std::move(upd.innovation);
    log.train = train;
    return log;
  }

  [[nodiscard]] const FusedBelief& belief() const noexcept { return belief_; }
  [[nodiscard]] const M& model() const noexcept { return model_; }
  [[nodiscard]] const EkfNoise& noise() const noexcept { return noise_; }
  [[nodiscard]] const KernelPrecomp& precomp() const noexcept { return *pre_; }

private:
  M model_;
  const KernelPrecomp* pre_;
  EkfNoise noise_;
  double gp_process_std_;
  FusedBelief belief_;
};

} // namespace rgpdkf
