#include "rdmd/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

namespace rdmd {

std::pair<double, CVector> column_objective(const ColumnSubproblem& prob, const CVector& b) {
  const CVector r = prob.x - prob.phi * b;
  double value = 0.0;
  CVector g(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    value += rho_value(prob.penalty, r(i));
    g(i) = rho_gradient(prob.penalty, r(i));
  }
  CVector grad = -prob.weight * (prob.phi.adjoint() * g);
  value *= prob.weight;
  if (!prob.q.is_zero()) {
    value += prob.q.eval(b);
    grad += prob.q.grad(b);
  }
  return {value, std::move(grad)};
}

CVector solve_column_ls(const CVector& x, const CMatrix& phi) {
  if (phi.cols() > phi.rows()) throw invalid_input("basis has more columns than rows");
  if (x.size() != phi.rows()) throw invalid_input("data column length does not match basis rows");
  return phi.completeOrthogonalDecomposition().solve(x);
}

ColumnSolution solve_column_bfgs(const ColumnSubproblem& prob, const CVector& init, const BfgsState* warm,
                                 const InnerOptions& options) {
  const Eigen::Index k = prob.phi.cols();
  const Eigen::Index dim = 2 * k;
  if (prob.x.size() != prob.phi.rows()) throw invalid_input("data column length does not match basis rows");
  if (init.size() != k) throw invalid_input("initial coefficients have the wrong length");
  if (!(prob.weight >= 0.0 && prob.weight <= 1.0)) throw invalid_input("column weight outside [0, 1]");

  ColumnSolution sol;
  if (prob.weight == 0.0 && prob.q.is_zero()) {
    sol.b = init;
    sol.degenerate = true;
    sol.converged = true;
    sol.state.inv_hessian = (warm && warm->inv_hessian.rows() == dim) ? warm->inv_hessian
                                                                      : RMatrix::Identity(dim, dim);
    sol.state.iterate = to_real(init);
    sol.state.gradient = RVector::Zero(dim);
    return sol;
  }

  auto eval = [&](const RVector& v) {
    auto [f, g] = column_objective(prob, to_complex(v));
    return std::pair<double, RVector>{f, to_real(g)};
  };

  RVector x = to_real(init);
  auto [f, g] = eval(x);
  const bool have_warm = warm && warm->inv_hessian.rows() == dim;
  RMatrix H = have_warm ? warm->inv_hessian : RMatrix::Identity(dim, dim);
  bool scale_pending = !have_warm;

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (g.norm() <= options.tol * (1.0 + std::abs(f))) {
      sol.converged = true;
      break;
    }
    RVector d = -H * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    RVector x_new;
    double f_new = 0.0;
    RVector g_new;
    bool accepted = false;
    for (int ls = 0; ls <= options.max_halvings; ++ls, t *= 0.5) {
      x_new = x + t * d;
      std::tie(f_new, g_new) = eval(x_new);
      if (std::isfinite(f_new) && f_new <= f + options.armijo_c1 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const RVector s = x_new - x;
    const RVector y = g_new - g;
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);

    const double sy = s.dot(y);
    if (sy <= options.curvature_eps * s.norm() * y.norm()) {
      H.setIdentity();
      continue;
    }
    if (scale_pending) {
      H *= sy / y.squaredNorm();
      scale_pending = false;
    }
    const double rho = 1.0 / sy;
    const RVector Hy = H * y;
    const double yHy = y.dot(Hy);
    H.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
    H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
  }
  if (!sol.converged && g.norm() <= options.tol * (1.0 + std::abs(f))) sol.converged = true;

  sol.b = to_complex(x);
  sol.objective = f;
  sol.iterations = it;
  sol.state.inv_hessian = std::move(H);
  sol.state.iterate = std::move(x);
  sol.state.gradient = std::move(g);
  sol.state.iterations = it;
  return sol;
}

namespace {

struct BlockResult {
  long iterations = 0;
  std::vector<Eigen::Index> degenerate;
  std::exception_ptr error;
};

void solve_block(const CMatrix& X, const CMatrix& phi, const CMatrix& B_ls, const RVector& w,
                 const Penalty& penalty, const SmoothSeparableReg& q, std::span<const Eigen::Index> columns,
                 Eigen::Index first, Eigen::Index last, const InnerOptions& options, CMatrix& B,
                 BlockResult& out) {
  std::optional<BfgsState> carry;
  Eigen::Index current = -1;
  try {
    for (Eigen::Index l = first; l < last; ++l) {
      current = columns[l];
      const CVector x = X.col(current);
      ColumnSubproblem prob{x, phi, w(current), penalty, q};
      const BfgsState* warm = (options.warm == WarmPolicy::chain && carry) ? &*carry : nullptr;
      ColumnSolution sol = solve_column_bfgs(prob, B_ls.col(l), warm, options);
      B.col(l) = sol.b;
      out.iterations += sol.iterations;
      if (sol.degenerate) out.degenerate.push_back(current);
      if (options.warm == WarmPolicy::chain) carry = std::move(sol.state);
    }
  } catch (const Error& e) {
    out.error = std::make_exception_ptr(Error(e.kind(), "column " + std::to_string(current) + ": " + e.what()));
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

InnerSweep solve_columns(const CMatrix& X, const CMatrix& phi, const RVector& w, const Penalty& penalty,
                         const SmoothSeparableReg& q, std::span<const Eigen::Index> columns,
                         const InnerOptions& options) {
  if (X.rows() != phi.rows()) throw invalid_input("data rows do not match basis rows");
  if (w.size() != X.cols()) throw invalid_input("weight vector length does not match data columns");
  if (phi.cols() > phi.rows()) throw invalid_input("basis has more columns than rows");
  const Eigen::Index count = static_cast<Eigen::Index>(columns.size());
  for (Eigen::Index c : columns)
    if (c < 0 || c >= X.cols()) throw invalid_input("column index " + std::to_string(c) + " out of range");

  CMatrix Xs(X.rows(), count);
  for (Eigen::Index l = 0; l < count; ++l) Xs.col(l) = X.col(columns[l]);
  const auto cod = phi.completeOrthogonalDecomposition();
  CMatrix B_ls = cod.solve(Xs);

  InnerSweep sweep;
  sweep.solves = count;
  if (has_closed_form(penalty, q)) {
    sweep.B = std::move(B_ls);
    return sweep;
  }

  sweep.B.resize(phi.cols(), count);
  const int workers = std::max<Eigen::Index>(1, std::min<Eigen::Index>(options.workers, count));
  std::vector<BlockResult> results(workers);
  if (workers == 1) {
    solve_block(X, phi, B_ls, w, penalty, q, columns, 0, count, options, sweep.B, results[0]);
  } else {
    std::vector<std::thread> pool;
    for (int b = 0; b < workers; ++b) {
      const Eigen::Index first = count * b / workers;
      const Eigen::Index last = count * (b + 1) / workers;
      pool.emplace_back(solve_block, std::cref(X), std::cref(phi), std::cref(B_ls), std::cref(w),
                        std::cref(penalty), std::cref(q), columns, first, last, std::cref(options),
                        std::ref(sweep.B), std::ref(results[b]));
    }
    for (auto& th : pool) th.join();
  }
  for (auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
    sweep.iterations += r.iterations;
    sweep.degenerate.insert(sweep.degenerate.end(), r.degenerate.begin(), r.degenerate.end());
  }
  return sweep;
}

InnerSweep solve_all_columns(const CMatrix& X, const CMatrix& phi, const RVector& w, const Penalty& penalty,
                             const SmoothSeparableReg& q, const InnerOptions& options) {
  std::vector<Eigen::Index> all(X.cols());
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  return solve_columns(X, phi, w, penalty, q, all, options);
}

}  // namespace rdmd
