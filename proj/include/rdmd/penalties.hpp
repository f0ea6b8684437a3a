#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "rdmd/types.hpp"

namespace rdmd {

enum class PenaltyKind { least_squares, huber };

/// Elementwise penalty on complex residuals. Huber acts on the modulus.
struct Penalty {
  PenaltyKind kind = PenaltyKind::least_squares;
  double kappa = 1.0;  ///< Huber threshold, residual units; ignored for least squares

  static Penalty least_squares() { return {PenaltyKind::least_squares, 1.0}; }
  static Penalty huber(double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw invalid_config("huber threshold must be positive and finite, got " + std::to_string(kappa));
    return {PenaltyKind::huber, kappa};
  }

  bool is_least_squares() const { return kind == PenaltyKind::least_squares; }
};

inline std::string to_string(PenaltyKind kind) {
  return kind == PenaltyKind::huber ? "huber" : "ls";
}

namespace detail {
template <typename Real>
void check_finite(const std::complex<Real>& z) {
  if (!std::isfinite(static_cast<double>(z.real())) || !std::isfinite(static_cast<double>(z.imag())))
    throw invalid_input("penalty argument is not finite");
}
}  // namespace detail

template <typename Real>
Real rho_value(const Penalty& p, const std::complex<Real>& z) {
  detail::check_finite(z);
  const Real sq = std::norm(z);
  if (p.kind == PenaltyKind::least_squares) return Real(0.5) * sq;
  const Real kappa = static_cast<Real>(p.kappa);
  const Real mod = std::sqrt(sq);
  if (mod < kappa) return Real(0.5) * sq;
  return kappa * mod - Real(0.5) * kappa * kappa;
}

/// Wirtinger derivative d rho / dz (z-bar held fixed).
template <typename Real>
std::complex<Real> rho_wirtinger_deriv(const Penalty& p, const std::complex<Real>& z) {
  detail::check_finite(z);
  if (p.kind == PenaltyKind::least_squares) return Real(0.5) * std::conj(z);
  const Real kappa = static_cast<Real>(p.kappa);
  const Real mod = std::abs(z);
  if (mod < kappa) return Real(0.5) * std::conj(z);
  return kappa * std::conj(z) / (Real(2) * mod);
}

/// Real-coordinate gradient packed as d/dx + i d/dy, equal to 2 * conj(rho').
/// Unchecked; callers validate residuals in bulk.
template <typename Real>
std::complex<Real> rho_gradient(const Penalty& p, const std::complex<Real>& z) {
  if (p.kind == PenaltyKind::least_squares) return z;
  const Real kappa = static_cast<Real>(p.kappa);
  const Real mod = std::abs(z);
  if (mod < kappa) return z;
  return (kappa / mod) * z;
}

template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, Eigen::Dynamic> rho_matrix(
    const Penalty& p, const Eigen::MatrixBase<Derived>& residual) {
  using Real = typename Derived::RealScalar;
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> out(residual.rows(), residual.cols());
  for (Eigen::Index j = 0; j < residual.cols(); ++j)
    for (Eigen::Index i = 0; i < residual.rows(); ++i) out(i, j) = rho_value(p, residual(i, j));
  return out;
}

/// Per-column penalty sums: entry j is sum_i rho(R(i, j)).
template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1> column_losses(
    const Penalty& p, const Eigen::MatrixBase<Derived>& residual) {
  return rho_matrix(p, residual).colwise().sum().transpose();
}

/// Elementwise rho_gradient of a residual matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> rho_gradient_matrix(
    const Penalty& p, const Eigen::MatrixBase<Derived>& residual) {
  if (p.is_least_squares()) return residual;
  return residual.unaryExpr([&p](const typename Derived::Scalar& z) { return rho_gradient(p, z); });
}

}  // namespace rdmd
