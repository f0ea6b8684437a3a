#include "rdmd/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace rdmd {

void CappedSimplex::validate(Eigen::Index n) const {
  if (h < 1 || h > n)
    throw invalid_config("capped simplex needs 1 <= h <= n, got h = " + std::to_string(h) +
                         ", n = " + std::to_string(n));
}

SmoothSeparableReg SmoothSeparableReg::ridge(double lambda) {
  if (!(lambda >= 0.0)) throw invalid_config("ridge weight must be nonnegative");
  SmoothSeparableReg q;
  q.value = [lambda](const CVector& b) { return 0.5 * lambda * b.squaredNorm(); };
  q.gradient = [lambda](const CVector& b) -> CVector { return lambda * b; };
  return q;
}

CVector prox_halfplane(const CVector& alpha, const HalfPlaneConstraint& constraint) {
  CVector out = alpha;
  for (Eigen::Index j = 0; j < out.size(); ++j)
    if (out(j).real() > constraint.gamma) out(j) = Complex(constraint.gamma, out(j).imag());
  return out;
}

RVector project_capped_simplex(const RVector& w, const CappedSimplex& cap) {
  const Eigen::Index n = w.size();
  cap.validate(n);
  for (Eigen::Index j = 0; j < n; ++j)
    if (!std::isfinite(w(j))) throw invalid_input("weight " + std::to_string(j) + " is not finite");
  if (cap.h == n) return RVector::Ones(n);

  // x_j = clip(w_j - lambda, 0, 1); sum_j x_j(lambda) is piecewise linear and
  // nonincreasing with kinks at w_j - 1 (leaves the cap) and w_j (hits zero).
  struct Event {
    double at;
    Eigen::Index j;
    bool enters;  // true: 1 -> free, false: free -> 0
  };
  std::vector<Event> events;
  events.reserve(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    events.push_back({w(j) - 1.0, j, true});
    events.push_back({w(j), j, false});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.at != b.at) return a.at < b.at;
    return a.enters && !b.enters;
  });

  const double h = static_cast<double>(cap.h);
  double n_one = static_cast<double>(n);
  double n_free = 0.0;
  double free_sum = 0.0;
  double lambda = events.back().at;
  for (const Event& e : events) {
    const double s = n_one + free_sum - n_free * e.at;
    if (s <= h) {
      lambda = n_free > 0.0 ? (n_one + free_sum - h) / n_free : e.at;
      break;
    }
    if (e.enters) {
      n_one -= 1.0;
      n_free += 1.0;
      free_sum += w(e.j);
    } else {
      n_free -= 1.0;
      free_sum -= w(e.j);
    }
  }
  return (w.array() - lambda).min(1.0).max(0.0).matrix();
}

RVector hard_select_weights(const RVector& losses, const CappedSimplex& cap) {
  const Eigen::Index n = losses.size();
  cap.validate(n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return losses(a) < losses(b); });
  RVector w = RVector::Zero(n);
  for (Eigen::Index l = 0; l < cap.h; ++l) w(order[l]) = 1.0;
  return w;
}

RVector prox_weight_update(const RVector& w, const RVector& losses, double step, const CappedSimplex& cap) {
  if (!(step > 0.0)) throw invalid_config("weight step must be positive");
  if (w.size() != losses.size()) throw invalid_input("weights and losses differ in length");
  return project_capped_simplex(w - step * losses, cap);
}

}  // namespace rdmd
