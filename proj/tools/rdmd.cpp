// Command-line driver: run experiment sweeps, the solver benchmark, single
// fits and synthetic data generation.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rdmd/harness.hpp"
#include "rdmd/io.hpp"
#include "rdmd/outer_solvers.hpp"
#include "rdmd/synth_data.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code_for(const rdmd::Error& e) {
  switch (e.kind()) {
    case rdmd::ErrorKind::invalid_config: return kExitConfig;
    default: return kExitData;
  }
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw rdmd::Error(rdmd::ErrorKind::invalid_input, "cannot write '" + path + "'");
  out << text;
}

int cmd_run(const std::string& config_path) {
  rdmd::ExperimentConfig config = rdmd::load_experiment_config(config_path);
  config.threads = rdmd::threads_from_env(config.threads);
  if (config.experiment == rdmd::ExperimentKind::fig4_bench) {
    const auto out = rdmd::run_fig4_bench(config);
    write_or_print(config.output, rdmd::fig4_csv(out));
    if (!config.output.empty()) write_or_print(config.output + ".meta.txt", rdmd::metadata_text(out.metadata));
    return 0;
  }
  const auto out = rdmd::run_experiment(config);
  if (config.output.empty()) {
    std::cout << rdmd::summary_csv(out.summary);
  } else {
    rdmd::save_experiment(out, config.output);
    std::cout << rdmd::summary_csv(out.summary);
  }
  return 0;
}

struct Fig4Args {
  std::string config;
  long m = 512, n = 1000, budget = 0;
  double step = 1e-7, sigma = 1e-3;
  long decay = 500;
  long batch = 0;
  double weight_prob = -1.0;
  unsigned long seed = 1;
  std::string out;
};

int cmd_fig4(const Fig4Args& a) {
  rdmd::KeyValues kv;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw rdmd::invalid_config("cannot open config file '" + a.config + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    kv = rdmd::parse_key_values(text);
  } else {
    kv["fig4_m"] = std::to_string(a.m);
    kv["fig4_n"] = std::to_string(a.n);
    kv["fig4_budget"] = std::to_string(a.budget);
    kv["step"] = rdmd::format_double(a.step);
    kv["decay_period"] = std::to_string(a.decay);
    kv["batch"] = std::to_string(a.batch);
    kv["weight_prob"] = rdmd::format_double(a.weight_prob);
    kv["sigmas"] = rdmd::format_double(a.sigma);
    kv["methods"] = "optimized";
    kv["seed"] = std::to_string(a.seed);
  }
  kv["experiment"] = "fig4-bench";
  if (!a.out.empty()) kv["output"] = a.out;
  const auto config = rdmd::experiment_config_from(kv);
  const auto out = rdmd::run_fig4_bench(config);
  write_or_print(config.output, rdmd::fig4_csv(out));
  std::cerr << rdmd::metadata_text(out.metadata);
  return 0;
}

struct FitArgs {
  std::string input;
  long rank = 2;
  std::string penalty = "ls";
  double kappa = 1.0;
  double h_frac = 1.0;
  std::optional<double> gamma;
  std::string solver;
  unsigned long seed = 0;
  int max_iterations = 500;
  std::string out;
};

int cmd_fit(const FitArgs& a) {
  rdmd::SnapshotMatrix data = rdmd::load_snapshots(a.input);
  rdmd::RobustDmdProblem problem;
  problem.data = data;
  problem.rank = a.rank;
  if (a.penalty == "huber")
    problem.penalty = rdmd::Penalty::huber(a.kappa);
  else if (a.penalty == "ls")
    problem.penalty = rdmd::Penalty::least_squares();
  else
    throw rdmd::invalid_config("unknown penalty '" + a.penalty + "'");
  if (!(a.h_frac > 0.0 && a.h_frac <= 1.0)) throw rdmd::invalid_config("--h-frac must lie in (0, 1]");
  const auto n = data.cols();
  problem.cap.h = std::clamp<Eigen::Index>(std::llround(a.h_frac * static_cast<double>(n)), 1, n);
  if (a.gamma) problem.constraint = rdmd::HalfPlaneConstraint{*a.gamma};
  problem.inner.workers = rdmd::threads_from_env(1);

  rdmd::OuterConfig outer;
  outer.solver = !a.solver.empty() ? rdmd::parse_solver(a.solver)
                                   : (a.gamma ? rdmd::SolverKind::vp_pg : rdmd::SolverKind::vp_bfgs);
  outer.seed = a.seed;
  outer.max_iterations = a.max_iterations;

  const auto res = rdmd::fit_multistart(problem, outer, rdmd::initial_alphas(data, a.rank));

  std::string text = "# solver = " + rdmd::to_string(outer.solver) + "\n# termination = " + res.termination +
                     "\n# outer_iterations = " + std::to_string(res.outer_iterations) +
                     "\n# inner_solves = " + std::to_string(res.inner_solves) +
                     "\n# objective = " + rdmd::format_double(res.objective_trace.back()) + "\nindex,alpha\n";
  for (Eigen::Index j = 0; j < res.alpha.size(); ++j)
    text += std::to_string(j) + ',' + rdmd::format_complex(res.alpha(j)) + '\n';
  write_or_print(a.out, text);
  return 0;
}

struct GenArgs {
  std::string system = "periodic";
  long snapshots = 128;
  std::string noise = "sparse";
  double sigma = 0.0, mu = 0.0, p = 0.05, amplitude = 1.0, width = 10.0;
  unsigned long seed = 0;
  std::string format = "csv";
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  if (a.out.empty()) throw rdmd::invalid_config("gen needs --out");
  rdmd::SnapshotMatrix clean;
  std::optional<rdmd::RVector> space;
  if (a.system == "periodic") {
    clean = rdmd::gen_periodic(rdmd::PeriodicSystemSpec{}, a.snapshots);
  } else if (a.system == "hidden") {
    rdmd::HiddenDynamicsSpec spec;
    clean = rdmd::gen_hidden(spec);
    space = spec.spatial_grid();
  } else {
    throw rdmd::invalid_config("unknown system '" + a.system + "'");
  }
  rdmd::NoiseSpec noise;
  noise.kind = rdmd::parse_noise_kind(a.noise);
  noise.sigma = a.sigma;
  noise.mu = a.mu;
  noise.p = a.p;
  noise.amplitude = a.amplitude;
  noise.width = a.width;
  noise.seed = a.seed;
  const auto data = rdmd::corrupt(clean, noise, space);
  if (a.format == "csv")
    rdmd::save_snapshots_csv(data, a.out);
  else if (a.format == "binary")
    rdmd::save_snapshots_binary(data, a.out);
  else
    throw rdmd::invalid_config("unknown format '" + a.format + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust, trimmed dynamic mode decomposition by variable projection"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment sweep from a key = value config file");
  run->add_option("config", config_path, "Config file")->required();

  Fig4Args f4;
  auto* fig4 = app.add_subcommand("fig4", "Compare PG, SPG and SVRG by cumulative inner solves");
  fig4->add_option("--config", f4.config, "Config file (overrides the flags below)");
  fig4->add_option("-m", f4.m, "Snapshots");
  fig4->add_option("-n", f4.n, "Spatial points");
  fig4->add_option("--budget", f4.budget, "Inner-solve budget per solver (0: 20 n)");
  fig4->add_option("--step", f4.step, "Initial step eta0");
  fig4->add_option("--decay", f4.decay, "Step decay period K");
  fig4->add_option("--batch", f4.batch, "Batch size tau (0: n / 50)");
  fig4->add_option("--weight-prob", f4.weight_prob, "P(J = 1) (negative: 1 / n)");
  fig4->add_option("--sigma", f4.sigma, "Background noise");
  fig4->add_option("--seed", f4.seed, "Master seed");
  fig4->add_option("--out", f4.out, "Trace CSV path");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "Fit a snapshot file");
  fitc->add_option("input", fa.input, "Snapshot file (CSV or RDMD1 binary)")->required();
  fitc->add_option("--rank", fa.rank, "Number of exponents k");
  fitc->add_option("--penalty", fa.penalty, "ls | huber")->check(CLI::IsMember({"ls", "huber"}));
  fitc->add_option("--kappa", fa.kappa, "Huber threshold");
  fitc->add_option("--h-frac", fa.h_frac, "Fraction of columns kept by trimming");
  fitc->add_option("--gamma", fa.gamma, "Upper bound on real(alpha)");
  fitc->add_option("--solver", fa.solver, "vp-bfgs | vp-pg | svrg | spg | pg");
  fitc->add_option("--seed", fa.seed, "Seed for stochastic solvers");
  fitc->add_option("--max-iterations", fa.max_iterations, "Outer iteration cap");
  fitc->add_option("--out", fa.out, "Output path (default stdout)");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write synthetic snapshot data");
  gen->add_option("--system", ga.system, "periodic | hidden")->check(CLI::IsMember({"periodic", "hidden"}));
  gen->add_option("--snapshots", ga.snapshots, "Periodic example length");
  gen->add_option("--noise", ga.noise, "sparse | broken-sensor | bump");
  gen->add_option("--sigma", ga.sigma, "Background noise");
  gen->add_option("--mu", ga.mu, "Spike size");
  gen->add_option("--p", ga.p, "Spike rate / broken-sensor fraction");
  gen->add_option("--amplitude", ga.amplitude, "Bump height");
  gen->add_option("--width", ga.width, "Bump width");
  gen->add_option("--seed", ga.seed, "Noise seed");
  gen->add_option("--format", ga.format, "csv | binary")->check(CLI::IsMember({"csv", "binary"}));
  gen->add_option("--out", ga.out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*fig4) return cmd_fig4(f4);
    if (*fitc) return cmd_fit(fa);
    if (*gen) return cmd_gen(ga);
  } catch (const rdmd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
