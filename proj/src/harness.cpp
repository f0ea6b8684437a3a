#include "rdmd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "rdmd/baselines_metrics.hpp"
#include "rdmd/io.hpp"
#include "rdmd/rng.hpp"

namespace rdmd {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::periodic: return "periodic";
    case ExperimentKind::hidden: return "hidden";
    case ExperimentKind::fig4_bench: return "fig4-bench";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::exact: return "exact";
    case Method::optimized: return "optimized";
    case Method::huber: return "huber";
    case Method::trimmed: return "trimmed";
    case Method::huber_trimmed: return "huber+trimmed";
  }
  return "?";
}

ExperimentKind parse_experiment(const std::string& name) {
  if (name == "periodic") return ExperimentKind::periodic;
  if (name == "hidden") return ExperimentKind::hidden;
  if (name == "fig4-bench" || name == "fig4") return ExperimentKind::fig4_bench;
  if (name == "custom") return ExperimentKind::custom;
  throw invalid_config("unknown experiment '" + name + "'");
}

Method parse_method(const std::string& name) {
  if (name == "exact") return Method::exact;
  if (name == "optimized") return Method::optimized;
  if (name == "huber") return Method::huber;
  if (name == "trimmed") return Method::trimmed;
  if (name == "huber+trimmed") return Method::huber_trimmed;
  throw invalid_config("unknown method '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw invalid_config("key '" + key + "': not a number: '" + v + "'");
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) throw invalid_config("key '" + key + "': not an integer: '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw invalid_config("key '" + key + "': not a boolean: '" + v + "'");
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw invalid_config("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw invalid_config("config line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw invalid_config("trials must be >= 1");
  if (sigmas.empty()) throw invalid_config("sigma sweep must be nonempty");
  for (double s : sigmas)
    if (!(s >= 0.0) || !std::isfinite(s)) throw invalid_config("sigma values must be finite and >= 0");
  if (methods.empty()) throw invalid_config("method list must be nonempty");
  if (!(h_frac > 0.0 && h_frac <= 1.0)) throw invalid_config("h_frac must lie in (0, 1]");
  if (!(kappa_factor > 0.0) || !(kappa_floor > 0.0)) throw invalid_config("kappa factor and floor must be positive");
  if (rank < 0) throw invalid_config("rank must be >= 0");
  if (snapshots < 2) throw invalid_config("snapshots must be >= 2");
  if (threads < 1) throw invalid_config("threads must be >= 1");
  if (experiment == ExperimentKind::custom) {
    if (data_path.empty()) throw invalid_config("custom experiment needs 'data'");
    if (truth.empty()) throw invalid_config("custom experiment needs 'truth'");
  }
  if (experiment == ExperimentKind::fig4_bench && (fig4_m < 2 || fig4_n < 1))
    throw invalid_config("fig4 dimensions must be positive");
}

SolverKind ExperimentConfig::effective_solver() const {
  if (solver) return *solver;
  return gamma ? SolverKind::vp_pg : SolverKind::vp_bfgs;
}

ExperimentConfig experiment_config_from(const KeyValues& kv) {
  ExperimentConfig c;
  for (const auto& [key, v] : kv) {
    if (key == "experiment") c.experiment = parse_experiment(v);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : split(v, ',')) c.methods.push_back(parse_method(m));
    } else if (key == "sigmas" || key == "sigma") {
      c.sigmas.clear();
      for (const auto& s : split(v, ',')) c.sigmas.push_back(to_double(key, s));
    } else if (key == "noise") c.noise = parse_noise_kind(v);
    else if (key == "mu") c.mu = to_double(key, v);
    else if (key == "p") c.p = to_double(key, v);
    else if (key == "amplitude") c.amplitude = to_double(key, v);
    else if (key == "width") c.width = to_double(key, v);
    else if (key == "trials") c.trials = static_cast<int>(to_long(key, v));
    else if (key == "rank") c.rank = to_long(key, v);
    else if (key == "snapshots") c.snapshots = to_long(key, v);
    else if (key == "h_frac") c.h_frac = to_double(key, v);
    else if (key == "kappa_factor") c.kappa_factor = to_double(key, v);
    else if (key == "kappa_floor") c.kappa_floor = to_double(key, v);
    else if (key == "gamma") c.gamma = to_double(key, v);
    else if (key == "solver") c.solver = parse_solver(v);
    else if (key == "step") c.outer.step = to_double(key, v);
    else if (key == "max_iterations") c.outer.max_iterations = static_cast<int>(to_long(key, v));
    else if (key == "tol") c.outer.tol = to_double(key, v);
    else if (key == "batch") c.outer.batch = to_long(key, v);
    else if (key == "weight_prob") c.outer.weight_update_prob = to_double(key, v);
    else if (key == "decay_period") c.outer.decay_period = to_long(key, v);
    else if (key == "backtracking") c.outer.backtracking = to_bool(key, v);
    else if (key == "trace_every") c.outer.trace_every = static_cast<int>(to_long(key, v));
    else if (key == "data") c.data_path = v;
    else if (key == "truth") {
      c.truth.clear();
      for (const auto& z : split(v, ';')) {
        try {
          c.truth.push_back(parse_complex(z));
        } catch (const Error& e) {
          throw invalid_config("key 'truth': " + std::string(e.what()));
        }
      }
    } else if (key == "output") c.output = v;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_long(key, v));
    else if (key == "threads") c.threads = static_cast<int>(to_long(key, v));
    else if (key == "fig4_m") c.fig4_m = to_long(key, v);
    else if (key == "fig4_n") c.fig4_n = to_long(key, v);
    else if (key == "fig4_budget") c.fig4_budget = to_long(key, v);
    else if (key == "fig4_perturb") c.fig4_perturb = to_double(key, v);
    else throw invalid_config("unknown config key '" + key + "'");
  }
  if (c.experiment == ExperimentKind::fig4_bench) {
    if (!kv.count("step")) c.outer.step = 1e-7;
    if (!kv.count("decay_period")) c.outer.decay_period = 500;
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_config("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_config_from(parse_key_values(ss.str()));
}

int threads_from_env(int fallback) {
  if (const char* env = std::getenv("RDMD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return fallback;
}

RobustDmdProblem make_problem(const ExperimentConfig& config, Method method, const SnapshotMatrix& data,
                              double sigma) {
  RobustDmdProblem p;
  p.data = data;
  p.rank = config.rank;
  const Eigen::Index n = data.cols();
  const bool huber = method == Method::huber || method == Method::huber_trimmed;
  const bool trimmed = method == Method::trimmed || method == Method::huber_trimmed;
  p.penalty = huber ? Penalty::huber(std::max(config.kappa_factor * sigma, config.kappa_floor))
                    : Penalty::least_squares();
  const auto h = static_cast<Eigen::Index>(std::llround(config.h_frac * static_cast<double>(n)));
  p.cap.h = trimmed ? std::clamp<Eigen::Index>(h, 1, n) : n;
  if (config.gamma) p.constraint = HalfPlaneConstraint{*config.gamma};
  return p;
}

namespace {

struct Scenario {
  SnapshotMatrix clean;
  std::optional<RVector> space;
  CVector truth;
  Eigen::Index rank;
};

Scenario build_scenario(const ExperimentConfig& config) {
  Scenario s;
  switch (config.experiment) {
    case ExperimentKind::periodic: {
      PeriodicSystemSpec spec;
      s.clean = gen_periodic(spec, config.snapshots);
      s.truth = spec.truth();
      s.rank = 2;
      break;
    }
    case ExperimentKind::hidden: {
      HiddenDynamicsSpec spec;
      s.clean = gen_hidden(spec);
      s.space = spec.spatial_grid();
      s.truth = spec.truth();
      s.rank = 4;
      break;
    }
    case ExperimentKind::custom: {
      try {
        s.clean = load_snapshots(config.data_path);
      } catch (const Error& e) {
        throw Error(ErrorKind::invalid_input, e.what());
      }
      s.truth = Eigen::Map<const CVector>(config.truth.data(), static_cast<Eigen::Index>(config.truth.size()));
      s.rank = s.truth.size();
      break;
    }
    case ExperimentKind::fig4_bench:
      throw invalid_config("fig4-bench is run through run_fig4_bench");
  }
  if (config.rank > 0) s.rank = config.rank;
  if (s.truth.size() != s.rank) throw invalid_config("rank does not match the number of reference eigenvalues");
  return s;
}

ResultRow run_method(const ExperimentConfig& config, const Scenario& sc, Method method, const SnapshotMatrix& data,
                     double sigma, std::uint64_t seed) {
  ResultRow row;
  row.experiment = to_string(config.experiment);
  row.method = to_string(method);
  row.sigma = sigma;
  row.trial_seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    CVector estimate;
    if (method == Method::exact) {
      estimate = exact_dmd(data, sc.rank).continuous;
    } else {
      ExperimentConfig local = config;
      local.rank = sc.rank;
      RobustDmdProblem problem = make_problem(local, method, data, sigma);
      OuterConfig outer = config.outer;
      outer.solver = config.effective_solver();
      outer.seed = seed;
      const FitResult res = fit_multistart(problem, outer, initial_alphas(data, sc.rank));
      estimate = res.alpha;
      row.outer_iterations = res.outer_iterations;
      row.inner_solves = res.inner_solves;
    }
    row.error = eig_error_l1(estimate, sc.truth);
    if (!std::isfinite(row.error)) {
      row.error = std::numeric_limits<double>::quiet_NaN();
      row.status = "non-finite estimate";
    }
  } catch (const Error& e) {
    row.error = std::numeric_limits<double>::quiet_NaN();
    row.status = csv_safe(e.what());
  }
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const int workers = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<CVector> initial_alphas(const SnapshotMatrix& data, Eigen::Index rank) {
  std::vector<CVector> out;
  try {
    CVector alpha = exact_dmd(data, rank).continuous;
    const double span = data.times.maxCoeff() - data.times.minCoeff();
    const double dt = data.rows() > 1 ? span / static_cast<double>(data.rows() - 1) : 1.0;
    // A zero discrete eigenvalue maps to -inf; use a fast decay instead.
    for (Eigen::Index j = 0; j < alpha.size(); ++j)
      if (!std::isfinite(alpha(j).real()) || !std::isfinite(alpha(j).imag())) alpha(j) = Complex(-1.0 / dt, 0.0);
    out.push_back(alpha);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::invalid_input && e.kind() != ErrorKind::invalid_config) throw;
  }
  out.push_back(periodogram_peaks(data, rank));
  return out;
}

FitResult fit_multistart(const RobustDmdProblem& problem, const OuterConfig& config,
                         const std::vector<CVector>& starts) {
  if (starts.empty()) throw invalid_config("no initial guesses");
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  long scoring_solves = 0;
  const RVector w0 = initial_weights(problem);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    CVector alpha = starts[s];
    if (problem.constraint) alpha = prox_halfplane(alpha, *problem.constraint);
    double value = std::numeric_limits<double>::infinity();
    try {
      const ReducedEval ev = reduced_objective_and_grad(problem, alpha, w0);
      scoring_solves += ev.solves;
      const RVector w = update_weights(problem, w0, ev.losses);
      value = w.dot(ev.losses) + ev.q_sum;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::overflow && e.kind() != ErrorKind::solver) throw;
    }
    if (std::isfinite(value) && value < best_value) {
      best_value = value;
      best = s;
    }
  }
  FitResult res = fit(problem, config, starts[best]);
  res.inner_solves += scoring_solves;
  return res;
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Scenario sc = build_scenario(config);
  const std::size_t n_sigma = config.sigmas.size();
  const std::size_t n_method = config.methods.size();
  const std::size_t n_trial = static_cast<std::size_t>(config.trials);

  // Slot (s, m, t) keeps the CSV order independent of completion order.
  std::vector<ResultRow> rows(n_sigma * n_method * n_trial);
  parallel_for(n_sigma * n_trial, config.threads, [&](std::size_t task) {
    const std::size_t s = task / n_trial;
    const std::size_t t = task % n_trial;
    const std::uint64_t seed = stream_seed(config.seed, (static_cast<std::uint64_t>(s) << 32) | t);
    NoiseSpec noise;
    noise.kind = config.noise;
    noise.sigma = config.sigmas[s];
    noise.mu = config.mu;
    noise.p = config.p;
    noise.amplitude = config.amplitude;
    noise.width = config.width;
    noise.seed = seed;
    const SnapshotMatrix data = corrupt(sc.clean, noise, sc.space);
    for (std::size_t m = 0; m < n_method; ++m)
      rows[(s * n_method + m) * n_trial + t] = run_method(config, sc, config.methods[m], data, config.sigmas[s], seed);
  });

  ExperimentOutput out;
  out.rows = std::move(rows);
  for (std::size_t s = 0; s < n_sigma; ++s) {
    for (std::size_t m = 0; m < n_method; ++m) {
      SummaryRow sr;
      sr.sigma = config.sigmas[s];
      sr.method = to_string(config.methods[m]);
      std::vector<double> errs;
      for (std::size_t t = 0; t < n_trial; ++t) {
        const ResultRow& r = out.rows[(s * n_method + m) * n_trial + t];
        if (std::isfinite(r.error)) errs.push_back(r.error);
      }
      sr.trials = static_cast<int>(n_trial);
      sr.trials_ok = static_cast<int>(errs.size());
      sr.median_error = errs.empty() ? std::numeric_limits<double>::quiet_NaN() : median_over_trials(errs);
      out.summary.push_back(sr);
    }
  }
  out.metadata["experiment"] = to_string(config.experiment);
  out.metadata["solver"] = to_string(config.effective_solver());
  out.metadata["initialization"] = "best of exact-dmd, periodogram-peaks";
  out.metadata["rank"] = std::to_string(sc.rank);
  out.metadata["trials"] = std::to_string(config.trials);
  out.metadata["seed"] = std::to_string(config.seed);
  out.metadata["noise"] = to_string(config.noise);
  out.metadata["kappa_rule"] = format_double(config.kappa_factor) + "*sigma (floor " + format_double(config.kappa_floor) + ")";
  out.metadata["h_frac"] = format_double(config.h_frac);
  if (config.gamma) out.metadata["gamma"] = format_double(*config.gamma);
  return out;
}

Fig4Output run_fig4_bench(const ExperimentConfig& config) {
  config.validate();
  HiddenDynamicsSpec spec;
  spec.points = config.fig4_n;
  spec.snapshots = config.fig4_m;
  const SnapshotMatrix clean = gen_hidden(spec);
  NoiseSpec noise;
  noise.kind = config.noise;
  noise.sigma = config.sigmas.front();
  noise.mu = config.mu;
  noise.p = config.p;
  noise.amplitude = config.amplitude;
  noise.width = config.width;
  noise.seed = stream_seed(config.seed, 0xF164);
  const SnapshotMatrix data = corrupt(clean, noise, spec.spatial_grid());

  Method method = Method::optimized;
  for (Method m : config.methods)
    if (m != Method::exact) {
      method = m;
      break;
    }
  ExperimentConfig local = config;
  local.rank = 4;
  const RobustDmdProblem problem = make_problem(local, method, data, noise.sigma);

  Rng rng(stream_seed(config.seed, 0xA1FA));
  CVector alpha0 = spec.truth();
  for (Eigen::Index j = 0; j < alpha0.size(); ++j)
    alpha0(j) += config.fig4_perturb * Complex(rng.normal(), rng.normal());

  const Eigen::Index n = data.cols();
  const long budget = config.fig4_budget > 0 ? config.fig4_budget : 20 * static_cast<long>(n);
  OuterConfig base = config.outer;
  base.tol = 0.0;
  base.grad_tol = 0.0;
  base.backtracking = false;
  base.seed = stream_seed(config.seed, 0x5EED);
  base.max_inner_solves = budget;

  Fig4Output out;
  {
    OuterConfig pg = base;
    pg.solver = SolverKind::pg;
    pg.max_iterations = static_cast<int>(std::max<long>(budget / n - 1, 0));
    out.fits["pg"] = fit(problem, pg, alpha0);
  }
  const Eigen::Index tau = base.batch_size(n);
  for (SolverKind kind : {SolverKind::spg, SolverKind::svrg}) {
    OuterConfig sc = base;
    sc.solver = kind;
    sc.max_iterations = static_cast<int>(std::min<long>(budget * 4, std::numeric_limits<int>::max()));
    if (!config.outer.trace_every || config.outer.trace_every == 1)
      sc.trace_every = static_cast<int>(std::max<Eigen::Index>(1, n / tau));
    out.fits[to_string(kind)] = fit(problem, sc, alpha0);
  }
  for (const auto& [name, res] : out.fits) {
    auto& trace = out.traces[name];
    for (std::size_t i = 0; i < res.objective_trace.size(); ++i)
      trace.push_back({res.inner_solve_trace[i], res.objective_trace[i]});
  }
  out.metadata["m"] = std::to_string(config.fig4_m);
  out.metadata["n"] = std::to_string(n);
  out.metadata["method"] = to_string(method);
  out.metadata["sigma"] = format_double(noise.sigma);
  out.metadata["eta0"] = format_double(base.step);
  out.metadata["K"] = std::to_string(base.decay_period);
  out.metadata["tau"] = std::to_string(tau);
  out.metadata["p_weight_update"] = format_double(base.weight_probability(n));
  out.metadata["budget"] = std::to_string(budget);
  out.metadata["seed"] = std::to_string(config.seed);
  return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string s = "experiment,method,sigma,trial_seed,error,outer_iterations,inner_solves,status\n";
  for (const auto& r : rows) {
    s += r.experiment + ',' + r.method + ',' + format_double(r.sigma) + ',' + std::to_string(r.trial_seed) + ',' +
         (std::isfinite(r.error) ? format_double(r.error) : std::string("nan")) + ',' +
         std::to_string(r.outer_iterations) + ',' + std::to_string(r.inner_solves) + ',' + r.status + '\n';
  }
  return s;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = "sigma,method,median_error,trials_ok,trials\n";
  for (const auto& r : rows) {
    s += format_double(r.sigma) + ',' + r.method + ',' +
         (std::isfinite(r.median_error) ? format_double(r.median_error) : std::string("nan")) + ',' +
         std::to_string(r.trials_ok) + ',' + std::to_string(r.trials) + '\n';
  }
  return s;
}

std::string timing_csv(const std::vector<ResultRow>& rows) {
  std::string s = "method,sigma,trial_seed,wall_time\n";
  for (const auto& r : rows)
    s += r.method + ',' + format_double(r.sigma) + ',' + std::to_string(r.trial_seed) + ',' + format_double(r.wall_time) + '\n';
  return s;
}

std::string metadata_text(const std::map<std::string, std::string>& meta) {
  std::string s;
  for (const auto& [k, v] : meta) s += k + " = " + v + '\n';
  return s;
}

std::string fig4_csv(const Fig4Output& out) {
  std::string s = "solver,inner_solves,objective\n";
  for (const auto& [name, trace] : out.traces)
    for (const auto& p : trace) s += name + ',' + std::to_string(p.inner_solves) + ',' + format_double(p.objective) + '\n';
  return s;
}

namespace {
void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + path + "'");
  out << text;
}
}  // namespace

void save_results(const std::vector<ResultRow>& rows, const std::string& path) { write_text(path, results_csv(rows)); }

void save_experiment(const ExperimentOutput& out, const std::string& path) {
  save_results(out.rows, path);
  write_text(path + ".summary.csv", summary_csv(out.summary));
  write_text(path + ".timing.csv", timing_csv(out.rows));
  write_text(path + ".meta.txt", metadata_text(out.metadata));
}

}  // namespace rdmd
