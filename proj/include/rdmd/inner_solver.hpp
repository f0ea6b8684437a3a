#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rdmd/penalties.hpp"
#include "rdmd/regularizers.hpp"
#include "rdmd/types.hpp"

namespace rdmd {

/// How BFGS inverse-Hessian approximations are shared across columns.
enum class WarmPolicy {
  cold,   ///< every column starts from the identity
  chain,  ///< column j+1 starts from column j's final approximation
};

struct InnerOptions {
  double tol = 1e-8;  ///< on ||grad|| / (1 + |objective|)
  int max_iterations = 200;
  double armijo_c1 = 1e-4;
  int max_halvings = 50;
  double curvature_eps = 1e-12;
  WarmPolicy warm = WarmPolicy::chain;
  /// Parallel column workers. With chained warm starts each worker chains
  /// within its own contiguous block.
  int workers = 1;
};

/// One decoupled column problem: min_b weight * sum_i rho(x - phi b)_i + q(b).
struct ColumnSubproblem {
  const CVector& x;
  const CMatrix& phi;
  double weight;
  const Penalty& penalty;
  const SmoothSeparableReg& q;
};

/// Quasi-Newton state over the 2k stacked real coordinates [re b; im b].
struct BfgsState {
  RMatrix inv_hessian;
  RVector iterate;
  RVector gradient;
  int iterations = 0;
};

struct ColumnSolution {
  CVector b;
  BfgsState state;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Zero weight with q == 0: every b is a minimizer, init is returned.
  bool degenerate = false;
};

/// Column objective and its real-coordinate gradient packed as d/d(re) + i d/d(im).
std::pair<double, CVector> column_objective(const ColumnSubproblem& prob, const CVector& b);

/// Minimum-norm least-squares solution phi^+ x.
CVector solve_column_ls(const CVector& x, const CMatrix& phi);

ColumnSolution solve_column_bfgs(const ColumnSubproblem& prob, const CVector& init,
                                 const BfgsState* warm = nullptr, const InnerOptions& options = {});

struct InnerSweep {
  CMatrix B;  ///< k x (number of solved columns)
  long iterations = 0;
  long solves = 0;
  std::vector<Eigen::Index> degenerate;
};

/// Solve the listed column subproblems. Column l of the returned B belongs to
/// data column columns[l]. BFGS iterates start from the least-squares fit.
InnerSweep solve_columns(const CMatrix& X, const CMatrix& phi, const RVector& w, const Penalty& penalty,
                         const SmoothSeparableReg& q, std::span<const Eigen::Index> columns,
                         const InnerOptions& options = {});

InnerSweep solve_all_columns(const CMatrix& X, const CMatrix& phi, const RVector& w, const Penalty& penalty,
                             const SmoothSeparableReg& q, const InnerOptions& options = {});

/// True when the column problems have the closed form phi^+ x.
inline bool has_closed_form(const Penalty& penalty, const SmoothSeparableReg& q) {
  return penalty.is_least_squares() && q.is_zero();
}

}  // namespace rdmd
