#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>
#include <algorithm>

#include "rdmd/types.hpp"

namespace rdmd {

/// Sample times. Non-equispaced grids are allowed; duplicates are not.
template <typename Real>
class BasicTimeGrid {
 public:
  using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  explicit BasicTimeGrid(Vector t) : t_(std::move(t)) {
    if (t_.size() < 1) throw invalid_input("time grid must contain at least one sample");
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(t_(i))))
        throw invalid_input("time grid entry " + std::to_string(i) + " is not finite");
    }
    std::vector<Real> sorted(t_.data(), t_.data() + t_.size());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw invalid_input("time grid contains duplicate samples");
  }

  const Vector& values() const { return t_; }
  Eigen::Index size() const { return t_.size(); }
  Real operator[](Eigen::Index i) const { return t_(i); }

 private:
  Vector t_;
};

using TimeGrid = BasicTimeGrid<double>;

/// Largest admissible real(alpha) * t before exp overflows double range.
inline constexpr double kMaxExponent = 700.0;

template <typename Real>
struct BasicBasisMatrix {
  using Scalar = std::complex<Real>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix values;
  Vector alpha;
  BasicTimeGrid<Real> grid;
};

using BasisMatrix = BasicBasisMatrix<double>;

/// Phi(i, j) = exp(alpha_j * t_i).
template <typename Real, typename AlphaDerived>
BasicBasisMatrix<Real> build_phi(const Eigen::MatrixBase<AlphaDerived>& alpha,
                                 const BasicTimeGrid<Real>& grid) {
  using Scalar = std::complex<Real>;
  const Eigen::Index m = grid.size();
  const Eigen::Index k = alpha.size();
  typename BasicBasisMatrix<Real>::Vector a = alpha;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!std::isfinite(static_cast<double>(a(j).real())) ||
        !std::isfinite(static_cast<double>(a(j).imag())))
      throw invalid_input("exponent " + std::to_string(j) + " is not finite");
  }
  typename BasicBasisMatrix<Real>::Matrix phi(m, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Real t = grid[i];
      const Scalar z = a(j) * t;
      if (static_cast<double>(z.real()) > kMaxExponent) {
        throw Error(ErrorKind::overflow, "exp overflow at (" + std::to_string(i) + ", " +
                                             std::to_string(j) + "): real(alpha*t) = " +
                                             std::to_string(static_cast<double>(z.real())));
      }
      phi(i, j) = std::exp(z);
    }
  }
  return {std::move(phi), std::move(a), grid};
}

/// Diag(t) * Phi, i.e. the derivative of Phi(i, j) with respect to alpha_j.
template <typename Real>
typename BasicBasisMatrix<Real>::Matrix phi_time_scaled(const BasicBasisMatrix<Real>& basis) {
  return basis.grid.values().template cast<std::complex<Real>>().asDiagonal() * basis.values;
}

}  // namespace rdmd
