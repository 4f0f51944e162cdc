#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rgpdkf/error.hpp"

namespace rgpdkf {

/// Squared-exponential kernel hyperparameters. The length scale is expressed
/// in normalized grid units, where neighbouring basis points are distance 1
/// apart, so unit values are a sensible default for most problems.
class KernelSpec {
public:
  KernelSpec() = default;

  KernelSpec(double length_scale, double signal_std)
      : length_scale_(length_scale), signal_std_(signal_std) {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
      throw std::invalid_argument("KernelSpec: length scale must be positive and finite");
    }
    if (!(signal_std > 0.0) || !std::isfinite(signal_std)) {
      throw std::invalid_argument("KernelSpec: signal std must be positive and finite");
    }
  }

  [[nodiscard]] double length_scale() const noexcept { return length_scale_; }
  [[nodiscard]] double signal_std() const noexcept { return signal_std_; }
  [[nodiscard]] double signal_variance() const noexcept { return signal_std_ * signal_std_; }

private:
  double length_scale_ = 1.0;
  double signal_std_ = 1.0;
};

/// One input axis of the basis-vector grid: point count and physical bounds.
struct GridAxis {
  std::size_t points = 2;
  double lower = 0.0;
  double upper = 1.0;
};

/// Equidistant basis-vector grid over the physical input box.
class GridSpec {
public:
  GridSpec() = default;

  explicit GridSpec(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) {
      throw std::invalid_argument("GridSpec: at least one input dimension required");
    }
    for (const auto& axis : axes_) {
      // A single-point axis is a degenerate but valid grid: every input maps to 0.
      if (axis.points < 1) {
        throw std::invalid_argument("GridSpec: every axis needs at least 1 point");
      }
      if (!std::isfinite(axis.lower) || !std::isfinite(axis.upper) || !(axis.lower < axis.upper)) {
        throw std::invalid_argument("GridSpec: axis bounds must be finite with lower < upper");
      }
    }
  }

  /// Convenience constructor for the common 1-D case.
  GridSpec(std::size_t points, double lower, double upper)
      : GridSpec(std::vector<GridAxis>{{points, lower, upper}}) {}

  [[nodiscard]] Eigen::Index input_dim() const noexcept {
    return static_cast<Eigen::Index>(axes_.size());
  }

  [[nodiscard]] Eigen::Index basis_count() const noexcept {
    Eigen::Index n = axes_.empty() ? 0 : 1;
    for (const auto& axis : axes_) n *= static_cast<Eigen::Index>(axis.points);
    return n;
  }

  [[nodiscard]] const std::vector<GridAxis>& axes() const noexcept { return axes_; }
  [[nodiscard]] const GridAxis& axis(std::size_t i) const { return axes_.at(i); }

private:
  std::vector<GridAxis> axes_;
};

/// k(x, x2) = sigma_K^2 * exp(-|x - x2|^2 / (2 L)).
inline double se_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& x2, const KernelSpec& spec) {
  if (x.size() != x2.size()) {
    throw DimensionError("se_kernel: input dimensions differ");
  }
  const double sq_dist = (x - x2).squaredNorm();
  return spec.signal_variance() * std::exp(-sq_dist / (2.0 * spec.length_scale()));
}

/// All vertices of the integer lattice {0..N_1-1} x ... x {0..N_n-1}, one per
/// row, with the first dimension varying fastest.
inline Eigen::MatrixXd build_grid(const GridSpec& grid) {
  const Eigen::Index rows = grid.basis_count();
  const Eigen::Index dims = grid.input_dim();
  Eigen::MatrixXd basis(rows, dims);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::Index rest = r;
    for (Eigen::Index d = 0; d < dims; ++d) {
      const auto n = static_cast<Eigen::Index>(grid.axis(static_cast<std::size_t>(d)).points);
      basis(r, d) = static_cast<double>(rest % n);
      rest /= n;
    }
  }
  return basis;
}

/// Affine map from physical input to grid units. Inputs outside the bounds
/// are extrapolated, not clamped.
inline Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& zeta, const GridSpec& grid) {
  if (zeta.size() != grid.input_dim()) {
    throw DimensionError("normalize: input dimension does not match grid");
  }
  Eigen::VectorXd out(zeta.size());
  for (Eigen::Index i = 0; i < zeta.size(); ++i) {
    if (!std::isfinite(zeta(i))) {
      throw std::invalid_argument("normalize: non-finite input component");
    }
    const auto& axis = grid.axis(static_cast<std::size_t>(i));
    out(i) = (zeta(i) - axis.lower) * static_cast<double>(axis.points - 1) / (axis.upper - axis.lower);
  }
  return out;
}

/// Offline data for a fixed kernel and grid: basis points, Gram matrix and its
/// QR factors. The explicit inverse is deliberately not formed. Immutable once
/// built, so one instance can be shared read-only between filters.
class KernelPrecomp {
public:
  KernelPrecomp(const KernelSpec& spec, const GridSpec& grid) : spec_(spec), grid_(grid) {
    basis_ = build_grid(grid_);
    const Eigen::Index n = basis_.rows();
    gram_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        gram_(i, j) = se_kernel(basis_.row(i).transpose(), basis_.row(j).transpose(), spec_);
      }
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gram_);
    q_ = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    r_ = qr.matrixQR().triangularView<Eigen::Upper>();

    const Eigen::VectorXd diag = r_.diagonal().cwiseAbs();
    const double max_diag = diag.maxCoeff();
    const double min_diag = diag.minCoeff();
    const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;
    if (!(min_diag > tol)) {
      const double cond = min_diag > 0.0 ? max_diag / min_diag : std::numeric_limits<double>::infinity();
      std::ostringstream msg;
      msg << "precompute: Gram matrix is rank-deficient to machine precision (|R| diagonal ratio "
          << cond << ", n = " << n << ", L = " << spec_.length_scale() << "); reduce L or N";
      throw SingularSystemError(msg.str(), cond);
    }
  }

  [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
  [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  [[nodiscard]] const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  [[nodiscard]] const Eigen::MatrixXd& q() const noexcept { return q_; }
  [[nodiscard]] const Eigen::MatrixXd& r() const noexcept { return r_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return basis_.rows(); }

  /// k(X_k, X) for a test input already in grid units.
  [[nodiscard]] Eigen::RowVectorXd kernel_row(const Eigen::Ref<const Eigen::VectorXd>& x_norm) const {
    Eigen::RowVectorXd row(size());
    for (Eigen::Index j = 0; j < size(); ++j) {
      row(j) = se_kernel(x_norm, basis_.row(j).transpose(), spec_);
    }
    return row;
  }

private:
  KernelSpec spec_;
  GridSpec grid_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd r_;
};

inline KernelPrecomp precompute(const KernelSpec& spec, const GridSpec& grid) {
  return KernelPrecomp(spec, grid);
}

/// Solves J K = rhs through the stored factors: J R^T = rhs Q, a triangular
/// solve. Throws SingularSystemError on a zero pivot.
inline Eigen::RowVectorXd solve_against_gram(const Eigen::Ref<const Eigen::RowVectorXd>& rhs,
                                             const KernelPrecomp& pre) {
  if (rhs.size() != pre.size()) {
    throw DimensionError("solve_against_gram: rhs length does not match basis count");
  }
  const auto& r = pre.r();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (r(i, i) == 0.0) {
      throw SingularSystemError("solve_against_gram: zero pivot in R");
    }
  }
  const Eigen::RowVectorXd projected = rhs * pre.q();
  // J R^T = projected  <=>  R J^T = projected^T
  Eigen::VectorXd jt = r.triangularView<Eigen::Upper>().solve(projected.transpose());
  return jt.transpose();
}

} // namespace rgpdkf
