#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdmd/outer_solvers.hpp"
#include "rdmd/synth_data.hpp"
#include "rdmd/types.hpp"

namespace rdmd {

enum class ExperimentKind { periodic, hidden, fig4_bench, custom };
enum class Method { exact, optimized, huber, trimmed, huber_trimmed };

std::string to_string(ExperimentKind kind);
std::string to_string(Method method);
ExperimentKind parse_experiment(const std::string& name);
Method parse_method(const std::string& name);

/// Flat `key = value` configuration; `#` starts a comment.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::periodic;
  std::vector<Method> methods{Method::exact, Method::optimized, Method::huber};
  std::vector<double> sigmas{1e-3};
  NoiseKind noise = NoiseKind::sparse;
  double mu = 1.0;
  double p = 0.05;
  double amplitude = 1.0;
  double width = 10.0;
  int trials = 25;
  Eigen::Index rank = 0;          ///< 0 picks the experiment's natural rank
  Eigen::Index snapshots = 128;   ///< periodic example length
  double h_frac = 0.8;            ///< trimmed methods keep round(h_frac * n) columns
  double kappa_factor = 5.0;      ///< huber kappa = kappa_factor * sigma
  double kappa_floor = 1e-6;      ///< used when kappa_factor * sigma is smaller
  std::optional<double> gamma;
  std::optional<SolverKind> solver;  ///< default vp-bfgs, or vp-pg when gamma is set
  OuterConfig outer;
  std::string data_path;          ///< custom experiment input
  std::vector<Complex> truth;     ///< custom experiment reference eigenvalues
  std::string output;             ///< result CSV path; empty writes nothing
  std::uint64_t seed = 1;
  int threads = 1;

  // fig4-bench
  Eigen::Index fig4_m = 512;
  Eigen::Index fig4_n = 1000;
  long fig4_budget = 0;           ///< cumulative inner solves per solver; 0 picks 20 n
  double fig4_perturb = 0.05;     ///< init = truth + perturbation of this size

  void validate() const;
  SolverKind effective_solver() const;
};

ExperimentConfig experiment_config_from(const KeyValues& kv);
ExperimentConfig load_experiment_config(const std::string& path);

struct ResultRow {
  std::string experiment;
  std::string method;
  double sigma = 0.0;
  std::uint64_t trial_seed = 0;
  double error = 0.0;  ///< NaN when the fit failed
  int outer_iterations = 0;
  long inner_solves = 0;
  double wall_time = 0.0;  ///< seconds
  std::string status = "ok";
};

struct SummaryRow {
  double sigma = 0.0;
  std::string method;
  double median_error = 0.0;
  int trials_ok = 0;
  int trials = 0;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;  ///< ordered by (sigma, method, trial)
  std::vector<SummaryRow> summary;
  std::map<std::string, std::string> metadata;
};

/// Problem definition for one method applied to one data set.
RobustDmdProblem make_problem(const ExperimentConfig& config, Method method, const SnapshotMatrix& data,
                              double sigma);

/// Outer starting points: exact-DMD eigenvalues (when exact DMD applies) and
/// periodogram peaks. Real data with a real start never leaves the real axis,
/// which is why a purely oscillatory start is always included.
std::vector<CVector> initial_alphas(const SnapshotMatrix& data, Eigen::Index rank);

/// Fits from the start with the lowest objective (weights from one update at
/// that start); the scoring solves are included in the inner-solve count.
FitResult fit_multistart(const RobustDmdProblem& problem, const OuterConfig& config,
                         const std::vector<CVector>& starts);

ExperimentOutput run_experiment(const ExperimentConfig& config);

struct TracePoint {
  long inner_solves = 0;
  double objective = 0.0;
};

struct Fig4Output {
  std::map<std::string, std::vector<TracePoint>> traces;  ///< keyed by solver name
  std::map<std::string, FitResult> fits;
  std::map<std::string, std::string> metadata;
};

Fig4Output run_fig4_bench(const ExperimentConfig& config);

/// Deterministic result CSV (wall time is left out; see save_timing).
std::string results_csv(const std::vector<ResultRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string timing_csv(const std::vector<ResultRow>& rows);
std::string metadata_text(const std::map<std::string, std::string>& meta);
std::string fig4_csv(const Fig4Output& out);

void save_results(const std::vector<ResultRow>& rows, const std::string& path);
/// Writes `path`, plus `path.summary.csv`, `path.timing.csv` and `path.meta.txt`.
void save_experiment(const ExperimentOutput& out, const std::string& path);

/// RDMD_THREADS, when set to a positive integer, else `fallback`.
int threads_from_env(int fallback);

}  // namespace rdmd
