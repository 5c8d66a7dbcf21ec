#pragma once

#include "mpo_lab/types.hpp"

namespace mpo {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Smallest admissible Cholesky diagonal entry; keeps covariances invertible.
inline constexpr double kCholDiagFloor = 1e-6;

// Lower-triangular factor A with positive diagonal; Sigma = A A^T.
struct CholeskyFactor {
  Matrix lower;

  Index dim() const { return lower.rows(); }
  Matrix covariance() const { return lower * lower.transpose(); }
  double log_det_covariance() const {
    return 2.0 * lower.diagonal().array().log().sum();
  }
  // A^{-1} b by forward substitution.
  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return lower.triangularView<Eigen::Lower>().solve(b.derived()).eval();
  }
};

// Maps an unconstrained lower-triangular matrix to a valid factor: softplus
// on the diagonal (clamped below at kCholDiagFloor), strict lower triangle
// copied, upper triangle zeroed.
CholeskyFactor cholesky_from_raw(const Matrix& raw);

// Derivative of the clamped softplus diagonal map.
inline double chol_diag_grad(double raw) {
  return softplus(raw) > kCholDiagFloor ? sigmoid(raw) : 0.0;
}

}  // namespace mpo
