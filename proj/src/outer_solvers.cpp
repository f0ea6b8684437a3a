#include "rdmd/outer_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rdmd/rng.hpp"

namespace rdmd {

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::vp_bfgs: return "vp-bfgs";
    case SolverKind::vp_pg: return "vp-pg";
    case SolverKind::svrg: return "svrg";
    case SolverKind::spg: return "spg";
    case SolverKind::pg: return "pg";
  }
  return "?";
}

SolverKind parse_solver(const std::string& name) {
  if (name == "vp-bfgs" || name == "bfgs") return SolverKind::vp_bfgs;
  if (name == "vp-pg") return SolverKind::vp_pg;
  if (name == "svrg") return SolverKind::svrg;
  if (name == "spg") return SolverKind::spg;
  if (name == "pg") return SolverKind::pg;
  throw invalid_config("unknown solver '" + name + "'");
}

void RobustDmdProblem::validate() const {
  const Eigen::Index m = data.rows();
  const Eigen::Index n = data.cols();
  if (data.times.size() != m) throw invalid_input("time vector length does not match snapshot rows");
  if (rank < 1 || rank > std::min(m, n))
    throw invalid_config("rank must satisfy 1 <= k <= min(m, n), got " + std::to_string(rank));
  cap.validate(n);
  if (weight_rule == WeightRule::prox && !(weight_step > 0.0))
    throw invalid_config("weight step must be positive");
  if (constraint && !std::isfinite(constraint->gamma)) throw invalid_config("half-plane bound must be finite");
  if (!data.values.allFinite()) throw invalid_input("snapshot matrix has non-finite entries");
}

void OuterConfig::validate(Eigen::Index n) const {
  if (!(step > 0.0)) throw invalid_config("step size must be positive");
  if (max_iterations < 0) throw invalid_config("max iterations must be nonnegative");
  const Eigen::Index tau = batch_size(n);
  if (tau < 1 || tau > n) throw invalid_config("batch size must satisfy 1 <= tau <= n");
  const double p = weight_probability(n);
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_config("weight update probability must lie in [0, 1]");
  if (decay_period < 0) throw invalid_config("decay period must be nonnegative");
  if (trace_every < 1) throw invalid_config("trace cadence must be at least 1");
}

Eigen::Index OuterConfig::batch_size(Eigen::Index n) const {
  return batch > 0 ? batch : std::max<Eigen::Index>(1, n / 50);
}

double OuterConfig::weight_probability(Eigen::Index n) const {
  return weight_update_prob >= 0.0 ? weight_update_prob : 1.0 / static_cast<double>(n);
}

double OuterConfig::step_at(long iteration) const {
  if (decay_period <= 0) return step;
  return step / static_cast<double>(iteration / decay_period + 1);
}

ColumnEval evaluate_columns(const RobustDmdProblem& problem, const TimeGrid& grid, const CVector& alpha,
                            const RVector& w, std::span<const Eigen::Index> columns) {
  const BasisMatrix basis = build_phi(alpha, grid);
  const CMatrix tphi = phi_time_scaled(basis);
  const CMatrix& X = problem.data.values;

  // With q == 0 a column's minimizer does not depend on its (positive) weight,
  // and any b minimizes a zero-weight column, so fit every column at unit weight.
  // Dropped columns then report losses at their own best fit.
  const RVector fit_w = problem.q.is_zero() ? RVector::Ones(X.cols()) : w;
  InnerSweep sweep = solve_columns(X, basis.values, fit_w, problem.penalty, problem.q, columns, problem.inner);

  const Eigen::Index count = static_cast<Eigen::Index>(columns.size());
  CMatrix Xs(X.rows(), count);
  for (Eigen::Index l = 0; l < count; ++l) Xs.col(l) = X.col(columns[l]);
  const CMatrix R = Xs - basis.values * sweep.B;

  ColumnEval ev;
  ev.losses = column_losses(problem.penalty, R);
  const CMatrix G = rho_gradient_matrix(problem.penalty, R);
  ev.grads = -(tphi.adjoint() * G).cwiseProduct(sweep.B.conjugate());
  ev.q_values = RVector::Zero(count);
  if (!problem.q.is_zero())
    for (Eigen::Index l = 0; l < count; ++l) ev.q_values(l) = problem.q.eval(sweep.B.col(l));
  ev.B = std::move(sweep.B);
  ev.iterations = sweep.iterations;
  ev.solves = sweep.solves;
  return ev;
}

namespace {

std::vector<Eigen::Index> all_columns(Eigen::Index n) {
  std::vector<Eigen::Index> cols(n);
  std::iota(cols.begin(), cols.end(), Eigen::Index{0});
  return cols;
}

CVector weighted_gradient(const CMatrix& grads, const RVector& w) { return grads * w.cast<Complex>(); }

ReducedEval assemble(ColumnEval&& ev, const RVector& w) {
  ReducedEval out;
  out.q_sum = ev.q_values.sum();
  out.value = w.dot(ev.losses) + out.q_sum;
  out.gradient = weighted_gradient(ev.grads, w);
  out.B = std::move(ev.B);
  out.losses = std::move(ev.losses);
  out.column_grads = std::move(ev.grads);
  out.iterations = ev.iterations;
  out.solves = ev.solves;
  return out;
}

/// Relative objective change below tol for `window` consecutive iterations.
class StallTracker {
 public:
  StallTracker(double tol, int window) : tol_(tol), window_(window) {}

  bool update(double value) {
    if (have_prev_) {
      const double scale = std::max(std::abs(prev_), 1e-300);
      count_ = std::abs(prev_ - value) <= tol_ * scale ? count_ + 1 : 0;
    }
    prev_ = value;
    have_prev_ = true;
    return count_ >= window_;
  }

 private:
  double tol_;
  int window_;
  double prev_ = 0.0;
  bool have_prev_ = false;
  int count_ = 0;
};

void record(FitResult& res, double value, const CVector& alpha) {
  res.objective_trace.push_back(value);
  res.inner_solve_trace.push_back(res.inner_solves);
  res.alpha_trace.push_back(alpha);
}

struct Evaluator {
  const RobustDmdProblem& problem;
  TimeGrid grid;
  std::vector<Eigen::Index> all;
  FitResult& res;

  ReducedEval full(const CVector& alpha, const RVector& w) {
    ReducedEval ev = assemble(evaluate_columns(problem, grid, alpha, w, all), w);
    res.inner_solves += ev.solves;
    res.inner_iterations += ev.iterations;
    return ev;
  }

  /// Objective only, without touching the solve counters.
  double objective_uncounted(const CVector& alpha, const RVector& w) {
    ColumnEval ev = evaluate_columns(problem, grid, alpha, w, all);
    return w.dot(ev.losses) + ev.q_values.sum();
  }
};

FitResult prepare(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  problem.validate();
  config.validate(problem.data.cols());
  if (alpha0.size() != problem.rank) throw invalid_input("initial exponents do not match the rank");
  if (!alpha0.allFinite()) throw invalid_input("initial exponents are not finite");
  FitResult res;
  res.alpha = problem.constraint ? prox_halfplane(alpha0, *problem.constraint) : alpha0;
  res.w = initial_weights(problem);
  return res;
}

}  // namespace

ReducedEval reduced_objective_and_grad(const RobustDmdProblem& problem, const CVector& alpha, const RVector& w) {
  problem.validate();
  if (w.size() != problem.data.cols()) throw invalid_input("weight vector length does not match data columns");
  const TimeGrid grid(problem.data.times);
  const auto cols = all_columns(problem.data.cols());
  return assemble(evaluate_columns(problem, grid, alpha, w, cols), w);
}

CVector svrg_direction(const CMatrix& stored, const CMatrix& fresh, std::span<const Eigen::Index> subset,
                       const RVector& w) {
  const double n = static_cast<double>(stored.cols());
  const double tau = static_cast<double>(subset.size());
  CVector correction = CVector::Zero(stored.rows());
  for (std::size_t l = 0; l < subset.size(); ++l) {
    const Eigen::Index j = subset[l];
    correction += w(j) * (fresh.col(static_cast<Eigen::Index>(l)) - stored.col(j));
  }
  return (n / tau) * correction + weighted_gradient(stored, w);
}

RVector initial_weights(const RobustDmdProblem& problem) {
  const Eigen::Index n = problem.data.cols();
  if (problem.cap.h == n) return RVector::Ones(n);
  return RVector::Constant(n, static_cast<double>(problem.cap.h) / static_cast<double>(n));
}

RVector update_weights(const RobustDmdProblem& problem, const RVector& w, const RVector& losses) {
  if (problem.cap.h == w.size()) return RVector::Ones(w.size());
  if (problem.weight_rule == WeightRule::hard) return hard_select_weights(losses, problem.cap);
  return prox_weight_update(w, losses, problem.weight_step, problem.cap);
}

FitResult fit_vp_bfgs(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  if (problem.constraint)
    throw invalid_config("vp-bfgs needs a smooth alpha regularizer; use vp-pg with a half-plane constraint");
  FitResult res = prepare(problem, config, alpha0);
  Evaluator eval{problem, TimeGrid(problem.data.times), all_columns(problem.data.cols()), res};
  constexpr double c1 = 1e-4;
  constexpr int max_halvings = 50;
  constexpr double curvature_eps = 1e-12;

  const Eigen::Index dim = 2 * problem.rank;
  RMatrix H = RMatrix::Identity(dim, dim);
  bool scale_pending = true;
  StallTracker stall(config.tol, config.stall_window);

  CVector alpha = res.alpha;
  RVector w = res.w;
  std::optional<ReducedEval> cached;
  RVector prev_alpha, prev_grad;
  res.termination = "max-iterations";

  for (int nu = 0;; ++nu) {
    ReducedEval ev = cached ? std::move(*cached) : eval.full(alpha, w);
    cached.reset();
    w = update_weights(problem, w, ev.losses);
    const double value = w.dot(ev.losses) + ev.q_sum;
    const RVector g = to_real(weighted_gradient(ev.column_grads, w));
    res.alpha = alpha;
    res.B = std::move(ev.B);
    res.w = w;
    record(res, value, alpha);
    res.outer_iterations = nu;

    if (g.norm() < config.grad_tol) {
      res.termination = "gradient";
      break;
    }
    if (stall.update(value)) {
      res.termination = "objective-change";
      break;
    }
    if (nu >= config.max_iterations) break;

    const RVector x = to_real(alpha);
    if (nu > 0) {
      const RVector s = x - prev_alpha;
      const RVector y = g - prev_grad;
      const double sy = s.dot(y);
      if (sy > curvature_eps * s.norm() * y.norm()) {
        if (scale_pending) {
          H *= sy / y.squaredNorm();
          scale_pending = false;
        }
        const double rho = 1.0 / sy;
        const RVector Hy = H * y;
        const double yHy = y.dot(Hy);
        H.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
        H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
      } else {
        H.setIdentity();
        scale_pending = true;
      }
    }
    prev_alpha = x;
    prev_grad = g;

    RVector d = -config.step * (H * g);
    if (!(g.dot(d) < 0.0)) {
      H.setIdentity();
      scale_pending = true;
      d = -config.step * g;
    }
    if (d.norm() > config.max_step_norm) d *= config.max_step_norm / d.norm();
    const double slope = g.dot(d);

    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls <= max_halvings; ++ls, t *= 0.5) {
      const CVector trial = to_complex(x + t * d);
      try {
        ReducedEval te = eval.full(trial, w);
        if (std::isfinite(te.value) && te.value <= value + c1 * t * slope) {
          alpha = trial;
          cached = std::move(te);
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::overflow) throw;
      }
    }
    if (!accepted) {
      res.termination = "line-search-stall";
      break;
    }
  }
  return res;
}

FitResult fit_vp_pg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  FitResult res = prepare(problem, config, alpha0);
  Evaluator eval{problem, TimeGrid(problem.data.times), all_columns(problem.data.cols()), res};
  constexpr int max_halvings = 50;
  auto prox = [&](const CVector& a) { return problem.constraint ? prox_halfplane(a, *problem.constraint) : a; };

  StallTracker stall(config.tol, config.stall_window);
  CVector alpha = res.alpha;
  RVector w = res.w;
  double eta_scale = 1.0;
  std::optional<ReducedEval> cached;
  res.termination = "max-iterations";

  for (int nu = 0;; ++nu) {
    ReducedEval ev = cached ? std::move(*cached) : eval.full(alpha, w);
    cached.reset();
    w = update_weights(problem, w, ev.losses);
    const double value = w.dot(ev.losses) + ev.q_sum;
    const CVector g = weighted_gradient(ev.column_grads, w);
    res.alpha = alpha;
    res.B = std::move(ev.B);
    res.w = w;
    record(res, value, alpha);
    res.outer_iterations = nu;

    if (stall.update(value)) {
      res.termination = "objective-change";
      break;
    }
    if (nu >= config.max_iterations) break;

    double eta = config.step_at(nu) * eta_scale;
    CVector next = prox(alpha - eta * g);
    if (config.backtracking) {
      bool accepted = false;
      for (int ls = 0; ls <= max_halvings; ++ls) {
        const CVector diff = next - alpha;
        try {
          ReducedEval te = eval.full(next, w);
          const double model = value + (to_real(g).dot(to_real(diff))) + diff.squaredNorm() / (2.0 * eta);
          if (std::isfinite(te.value) && te.value <= model) {
            cached = std::move(te);
            accepted = true;
            break;
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::overflow) throw;
        }
        eta *= 0.5;
        eta_scale *= 0.5;
        next = prox(alpha - eta * g);
      }
      if (!accepted) {
        res.termination = "line-search-stall";
        break;
      }
    }
    const double mapping = (next - alpha).norm() / eta;
    alpha = next;
    if (mapping < config.grad_tol) {
      // One more evaluation so the reported (alpha, B, w) agree.
      ReducedEval fin = cached ? std::move(*cached) : eval.full(alpha, w);
      cached.reset();
      res.alpha = alpha;
      res.B = std::move(fin.B);
      record(res, w.dot(fin.losses) + fin.q_sum, alpha);
      res.outer_iterations = nu + 1;
      res.termination = "gradient";
      break;
    }
  }
  return res;
}

namespace {

enum class Estimator { svrg, spg };

FitResult fit_stochastic(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0,
                         Estimator kind) {
  FitResult res = prepare(problem, config, alpha0);
  const Eigen::Index n = problem.data.cols();
  Evaluator eval{problem, TimeGrid(problem.data.times), all_columns(n), res};
  auto prox = [&](const CVector& a) { return problem.constraint ? prox_halfplane(a, *problem.constraint) : a; };

  const Eigen::Index tau = config.batch_size(n);
  const double p_weights = config.weight_probability(n);
  Rng rng(config.seed);

  CVector alpha = res.alpha;
  RVector w = res.w;
  CMatrix stored;
  CMatrix B;
  if (kind == Estimator::svrg) {
    ReducedEval ev = eval.full(alpha, w);
    stored = std::move(ev.column_grads);
    B = std::move(ev.B);
    // Score the start after one weight update, as the full-gradient solvers do.
    record(res, update_weights(problem, w, ev.losses).dot(ev.losses) + ev.q_sum, alpha);
  } else {
    B = CMatrix::Zero(problem.rank, n);
    const ColumnEval ev = evaluate_columns(problem, eval.grid, alpha, w, eval.all);
    record(res, update_weights(problem, w, ev.losses).dot(ev.losses) + ev.q_values.sum(), alpha);
  }
  res.termination = "max-iterations";

  std::vector<Eigen::Index> pool = all_columns(n);
  for (long nu = 0; nu < config.max_iterations; ++nu) {
    if (config.max_inner_solves > 0 && res.inner_solves >= config.max_inner_solves) {
      res.termination = "inner-solve-budget";
      break;
    }
    // Partial Fisher-Yates draws tau distinct columns; solve them in index order.
    for (Eigen::Index l = 0; l < tau; ++l) {
      const auto span = static_cast<double>(n - l);
      const Eigen::Index pick = l + std::min<Eigen::Index>(n - l - 1, static_cast<Eigen::Index>(rng.uniform() * span));
      std::swap(pool[l], pool[pick]);
    }
    std::vector<Eigen::Index> subset(pool.begin(), pool.begin() + tau);
    std::sort(subset.begin(), subset.end());
    const bool refresh_weights = rng.bernoulli(p_weights);

    ColumnEval part = evaluate_columns(problem, eval.grid, alpha, w, subset);
    res.inner_solves += part.solves;
    res.inner_iterations += part.iterations;
    for (Eigen::Index l = 0; l < tau; ++l) B.col(subset[l]) = part.B.col(l);

    CVector direction;
    if (refresh_weights) {
      // Weight selection needs every column's loss at the current alpha.
      std::vector<Eigen::Index> rest;
      rest.reserve(n - tau);
      std::set_difference(eval.all.begin(), eval.all.end(), subset.begin(), subset.end(),
                          std::back_inserter(rest));
      CMatrix grads(problem.rank, n);
      RVector losses(n);
      for (Eigen::Index l = 0; l < tau; ++l) {
        grads.col(subset[l]) = part.grads.col(l);
        losses(subset[l]) = part.losses(l);
      }
      if (!rest.empty()) {
        ColumnEval others = evaluate_columns(problem, eval.grid, alpha, w, rest);
        res.inner_solves += others.solves;
        res.inner_iterations += others.iterations;
        for (std::size_t l = 0; l < rest.size(); ++l) {
          const auto li = static_cast<Eigen::Index>(l);
          grads.col(rest[l]) = others.grads.col(li);
          losses(rest[l]) = others.losses(li);
          B.col(rest[l]) = others.B.col(li);
        }
      }
      w = update_weights(problem, w, losses);
      direction = weighted_gradient(grads, w);
      if (kind == Estimator::svrg) stored = std::move(grads);
    } else if (kind == Estimator::svrg) {
      direction = svrg_direction(stored, part.grads, subset, w);
      for (Eigen::Index l = 0; l < tau; ++l) stored.col(subset[l]) = part.grads.col(l);
    } else {
      direction = CVector::Zero(problem.rank);
      for (Eigen::Index l = 0; l < tau; ++l) direction += w(subset[l]) * part.grads.col(l);
      direction *= static_cast<double>(n) / static_cast<double>(tau);
    }

    alpha = prox(alpha - config.step_at(nu) * direction);
    res.outer_iterations = static_cast<int>(nu + 1);
    if ((nu + 1) % config.trace_every == 0) record(res, eval.objective_uncounted(alpha, w), alpha);
  }
  res.alpha = alpha;
  res.w = w;
  res.B = std::move(B);
  return res;
}

}  // namespace

FitResult fit_svrg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  return fit_stochastic(problem, config, alpha0, Estimator::svrg);
}

FitResult fit_baseline_spg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  return fit_stochastic(problem, config, alpha0, Estimator::spg);
}

FitResult fit_baseline_pg(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  return fit_vp_pg(problem, config, alpha0);
}

FitResult fit(const RobustDmdProblem& problem, const OuterConfig& config, const CVector& alpha0) {
  switch (config.solver) {
    case SolverKind::vp_bfgs: return fit_vp_bfgs(problem, config, alpha0);
    case SolverKind::vp_pg: return fit_vp_pg(problem, config, alpha0);
    case SolverKind::svrg: return fit_svrg(problem, config, alpha0);
    case SolverKind::spg: return fit_baseline_spg(problem, config, alpha0);
    case SolverKind::pg: return fit_baseline_pg(problem, config, alpha0);
  }
  throw invalid_config("unknown solver");
}

}  // namespace rdmd
