#pragma once

#include <functional>

#include "rdmd/types.hpp"

namespace rdmd {

/// Indicator of {alpha : real(alpha_j) <= gamma for all j}.
struct HalfPlaneConstraint {
  double gamma = 0.0;
};

/// {w : 0 <= w_j <= 1, sum w = h}.
struct CappedSimplex {
  Eigen::Index h = 1;

  void validate(Eigen::Index n) const;
};

/// Smooth separable regularizer q(b) applied to every column of B.
struct SmoothSeparableReg {
  std::function<double(const CVector&)> value;
  /// Real-coordinate gradient, packed as d/d(re) + i d/d(im).
  std::function<CVector(const CVector&)> gradient;

  static SmoothSeparableReg zero() { return {}; }
  /// q(b) = lambda/2 * ||b||^2.
  static SmoothSeparableReg ridge(double lambda);

  bool is_zero() const { return !value; }
  double eval(const CVector& b) const { return value ? value(b) : 0.0; }
  CVector grad(const CVector& b) const { return gradient ? gradient(b) : CVector::Zero(b.size()); }
};

CVector prox_halfplane(const CVector& alpha, const HalfPlaneConstraint& constraint);

/// Euclidean projection onto the capped simplex.
RVector project_capped_simplex(const RVector& w, const CappedSimplex& cap);

/// Ones at the h smallest losses (lowest index wins ties), zeros elsewhere.
RVector hard_select_weights(const RVector& losses, const CappedSimplex& cap);

RVector prox_weight_update(const RVector& w, const RVector& losses, double step, const CappedSimplex& cap);

}  // namespace rdmd
