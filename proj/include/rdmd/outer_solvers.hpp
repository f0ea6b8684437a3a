#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdmd/exp_basis.hpp"
#include "rdmd/inner_solver.hpp"
#include "rdmd/penalties.hpp"
#include "rdmd/regularizers.hpp"
#include "rdmd/types.hpp"

namespace rdmd {

enum class SolverKind { vp_bfgs, vp_pg, svrg, spg, pg };
enum class WeightRule { hard, prox };

std::string to_string(SolverKind kind);
SolverKind parse_solver(const std::string& name);

/// min over (alpha, B, w) of sum_j w_j rho(X_j - Phi(alpha) b_j) + q(b_j) + r(alpha) + s(w).
struct RobustDmdProblem {
  SnapshotMatrix data;
  Eigen::Index rank = 1;
  Penalty penalty = Penalty::least_squares();
  std::optional<HalfPlaneConstraint> constraint;
  SmoothSeparableReg q = SmoothSeparableReg::zero();
  CappedSimplex cap{1};
  WeightRule weight_rule = WeightRule::hard;
  double weight_step = 1.0;
  InnerOptions inner;

  void validate() const;
  /// Trimming disabled.
  static CappedSimplex no_trimming(const SnapshotMatrix& data) { return {data.cols()}; }
};

struct OuterConfig {
  SolverKind solver = SolverKind::vp_bfgs;
  double step = 1.0;  ///< initial eta_alpha
  int max_iterations = 500;
  double tol = 1e-8;  ///< relative objective change
  int stall_window = 3;
  double grad_tol = 1e-7;
  /// BFGS steps longer than this (in alpha units) are shortened before the line search.
  double max_step_norm = 1.0;
  /// Backtrack eta_alpha on sufficient-decrease failure (vp-pg / pg only).
  bool backtracking = true;
  Eigen::Index batch = 0;              ///< SVRG/SPG tau; 0 selects max(1, n / 50)
  double weight_update_prob = -1.0;    ///< P(J = 1); negative selects 1 / n
  long decay_period = 0;               ///< K in eta0 / (floor(nu / K) + 1); 0 keeps eta constant
  long max_inner_solves = 0;           ///< stochastic budget; 0 is unlimited
  int trace_every = 1;                 ///< stochastic solvers: full-objective cadence
  std::uint64_t seed = 0;

  void validate(Eigen::Index n) const;
  Eigen::Index batch_size(Eigen::Index n) const;
  double weight_probability(Eigen::Index n) const;
  double step_at(long iteration) const;
};

struct FitResult {
  CVector alpha;
  CMatrix B;
  RVector w;
  std::vector<double> objective_trace;
  std::vector<long> inner_solve_trace;  ///< cumulative solves at each trace point
  std::vector<CVector> alpha_trace;
  long inner_solves = 0;
  long inner_iterations = 0;
  int outer_iterations = 0;
  std::string termination;
};

/// Column-wise pieces of the reduced function at fixed (alpha, w).
struct ColumnEval {
  CMatrix B;           ///< k x count
  RVector losses;      ///< unweighted sum_i rho(R_ij)
  RVector q_values;    ///< q(b_j), zero when q is absent
  CMatrix grads;       ///< unweighted alpha-gradient of each column's rho term, k x count
  long iterations = 0;
  long solves = 0;
};

ColumnEval evaluate_columns(const RobustDmdProblem& problem, const TimeGrid& grid, const CVector& alpha,
                            const RVector& w, std::span<const Eigen::Index> columns);

struct ReducedEval {
  double value = 0.0;
  double q_sum = 0.0;
  CVector gradient;  ///< packed d/d(re alpha) + i d/d(im alpha)
  CMatrix B;
  RVector losses;
  CMatrix column_grads;
  long iterations = 0;
  long solves = 0;
};

/// Reduced objective f(alpha, B(alpha, w), w) and its alpha-gradient.
ReducedEval reduced_objective_and_grad(const RobustDmdProblem& problem, const CVector& alpha, const RVector& w);

/// Unbiased SVRG estimate of the full reduced gradient sum_j w_j u_j:
/// (n / tau) sum_{l} w_{I_l} (fresh_l - stored_{I_l}) + sum_j w_j stored_j.
CVector svrg_direction(const CMatrix& stored, const CMatrix& fresh, std::span<const Eigen::Index> subset,
                       const RVector& w);

RVector initial_weights(const RobustDmdProblem& problem);
RVector update_weights(const RobustDmdProblem& problem, const RVector& w, const RVector& losses);

FitResult fit_vp_bfgs(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);
FitResult fit_vp_pg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);
FitResult fit_svrg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);
FitResult fit_baseline_pg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);
FitResult fit_baseline_spg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);

/// Dispatch on config.solver.
FitResult fit(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0);

}  // namespace rdmd
