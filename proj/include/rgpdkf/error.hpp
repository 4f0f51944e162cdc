#pragma once

#include <stdexcept>
#include <string>

namespace rgpdkf {

/// Raised when a linear system cannot be solved to working precision
/// (rank-deficient Gram matrix, singular innovation covariance).
class SingularSystemError : public std::runtime_error {
public:
  explicit SingularSystemError(const std::string& what, double condition = 0.0)
      : std::runtime_error(what), condition_(condition) {}

  /// Rough condition estimate of the offending matrix, 0 if unknown.
  [[nodiscard]] double condition() const noexcept { return condition_; }

private:
  double condition_;
};

/// Raised when a model, belief, or configuration has inconsistent dimensions.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace rgpdkf
