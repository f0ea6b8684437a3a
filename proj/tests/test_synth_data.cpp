#include <doctest.h>

#include <cmath>

#include "rdmd/baselines_metrics.hpp"
#include "rdmd/synth_data.hpp"
#include "test_util.hpp"

using namespace rdmd;

namespace {

/// Classical RK4 on x' = A x.
Eigen::Vector2d rk4(const Eigen::Matrix2d& A, Eigen::Vector2d x, double t_end, int steps) {
  const double h = t_end / steps;
  for (int s = 0; s < steps; ++s) {
    const Eigen::Vector2d k1 = A * x;
    const Eigen::Vector2d k2 = A * (x + 0.5 * h * k1);
    const Eigen::Vector2d k3 = A * (x + 0.5 * h * k2);
    const Eigen::Vector2d k4 = A * (x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_CASE("gen_periodic") {
  const PeriodicSystemSpec spec;
  const auto X = gen_periodic(spec, 128);
  REQUIRE(X.rows() == 128);
  REQUIRE(X.cols() == 2);
  CHECK(X.values(0, 0) == Complex(1.0, 0.0));
  CHECK(X.values(0, 1) == Complex(0.1, 0.0));
  CHECK(X.times(10) == doctest::Approx(1.0).epsilon(1e-15));
  const Eigen::Vector2d ref = rk4(spec.system, spec.x0, 1.0, 2000);
  CHECK(std::abs(X.values(10, 0) - ref(0)) < 1e-9);
  CHECK(std::abs(X.values(10, 1) - ref(1)) < 1e-9);
  CHECK(X.values.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(eig_error_l1(exact_dmd(X, 2).continuous, spec.truth()) < 1e-8);
  CHECK_THROWS_AS(gen_periodic(spec, 0), Error);
}

TEST_CASE("gen_hidden") {
  const HiddenDynamicsSpec spec;
  const auto X = gen_hidden(spec);
  REQUIRE(X.rows() == 128);
  REQUIRE(X.cols() == 300);
  const RVector y = spec.spatial_grid();
  CHECK(y(0) == 0.0);
  CHECK(y(299) == doctest::Approx(15.0).epsilon(1e-15));
  for (Eigen::Index i = 0; i < 300; ++i)
    CHECK(std::abs(X.values(0, i) - (std::sin(y(i)) + std::sin(0.4 * y(i)))) < 1e-14);
  const double dt = std::numbers::pi / 254.0;
  const double spot = std::sin(-dt) * std::exp(dt) + std::sin(-3.7 * dt) * std::exp(-0.2 * dt);
  CHECK(std::abs(X.values(1, 0) - spot) < 1e-14);
  const RVector sv = Eigen::BDCSVD<CMatrix>(X.values).singularValues();
  CHECK(sv(4) < 1e-10 * sv(0));
  CHECK(sv(3) > 1e-3 * sv(0));
  CVector truth = spec.truth();
  CHECK(truth.size() == 4);
}

TEST_CASE("corrupt: no noise leaves data unchanged") {
  const HiddenDynamicsSpec spec;
  const auto clean = gen_hidden(spec);
  for (NoiseKind kind : {NoiseKind::sparse, NoiseKind::broken_sensor, NoiseKind::bump}) {
    NoiseSpec noise;
    noise.kind = kind;
    noise.amplitude = 0.0;
    noise.seed = 3;
    CHECK(corrupt(clean, noise, spec.spatial_grid()).values == clean.values);
  }
}

TEST_CASE("corrupt is deterministic and seed dependent") {
  const auto clean = gen_periodic(PeriodicSystemSpec{}, 64);
  NoiseSpec noise;
  noise.sigma = 0.1;
  noise.mu = 1.0;
  noise.seed = 77;
  const auto a = corrupt(clean, noise), b = corrupt(clean, noise);
  CHECK(a.values == b.values);
  CHECK(a.times == clean.times);
  noise.seed = 78;
  CHECK(corrupt(clean, noise).values != a.values);
}

TEST_CASE("sparse spike count follows the binomial law") {
  const auto clean = gen_hidden(HiddenDynamicsSpec{});
  NoiseSpec noise;
  noise.mu = 1.0;
  noise.p = 0.05;
  noise.seed = 2024;
  const auto X = corrupt(clean, noise);
  long spikes = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) spikes += X.values(i, j) != clean.values(i, j);
  const double n = 38400.0, p = 0.05;
  CHECK(std::abs(static_cast<double>(spikes) - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("broken-sensor noise stays on one sensor subset") {
  const HiddenDynamicsSpec spec;
  const auto clean = gen_hidden(spec);
  NoiseSpec noise;
  noise.kind = NoiseKind::broken_sensor;
  noise.sigma = 1e-3;
  noise.mu = 1.0;
  noise.p = 0.1;
  noise.seed = 9;
  const auto X = corrupt(clean, noise, spec.spatial_grid());
  const CMatrix diff = X.values - clean.values;
  int broken = 0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j) {
    const double worst = diff.col(j).cwiseAbs().maxCoeff();
    if (worst > 0.01) {
      ++broken;
      // A broken sensor is corrupted at essentially every time.
      int big = 0;
      for (Eigen::Index i = 0; i < diff.rows(); ++i) big += std::abs(diff(i, j)) > 0.01;
      CHECK(big > diff.rows() / 2);
    } else {
      CHECK(worst < 6e-3);
    }
  }
  CHECK(broken > 10);
  CHECK(broken < 55);
}

TEST_CASE("bump noise") {
  const HiddenDynamicsSpec spec;
  const auto clean = gen_hidden(spec);
  const RVector y = spec.spatial_grid();
  NoiseSpec noise;
  noise.kind = NoiseKind::bump;
  noise.amplitude = 2.0;
  noise.width = 10.0;
  noise.center_y = y(150);
  noise.center_t = clean.times(64);
  const auto X = corrupt(clean, noise, y);
  const RMatrix diff = (X.values - clean.values).real();
  CHECK(diff(64, 150) == doctest::Approx(2.0).epsilon(1e-14));
  const double dy = y(1) - y(0), dt = spec.dt;
  const double off = 2.0 * std::exp(-std::pow(5 * dy / (10 * dy), 2) - std::pow(3 * dt / (10 * dt), 2));
  CHECK(diff(67, 155) == doctest::Approx(off).epsilon(1e-12));
  CHECK(diff.maxCoeff() == diff(64, 150));
}

TEST_CASE("background noise is independent across trial seeds") {
  const auto clean = gen_hidden(HiddenDynamicsSpec{});
  NoiseSpec noise;
  noise.sigma = 1.0;
  std::vector<RVector> draws;
  for (int s = 0; s < 200; ++s) {
    noise.seed = stream_seed(1, static_cast<std::uint64_t>(s));
    const RMatrix d = (corrupt(clean, noise).values - clean.values).real();
    draws.push_back(Eigen::Map<const RVector>(d.data(), d.size()));
  }
  double worst = 0.0;
  for (std::size_t s = 0; s + 1 < draws.size(); ++s) {
    const RVector a = draws[s].array() - draws[s].mean(), b = draws[s + 1].array() - draws[s + 1].mean();
    worst = std::max(worst, std::abs(a.dot(b)) / (a.norm() * b.norm()));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("invalid noise parameters") {
  const auto clean = gen_periodic(PeriodicSystemSpec{}, 8);
  NoiseSpec noise;
  noise.sigma = -1.0;
  CHECK_THROWS_AS(corrupt(clean, noise), Error);
  noise.sigma = 0.0;
  noise.p = 1.5;
  CHECK_THROWS_AS(corrupt(clean, noise), Error);
  noise.p = 0.1;
  noise.kind = NoiseKind::bump;
  noise.width = 0.0;
  CHECK_THROWS_AS(corrupt(clean, noise), Error);
  try {
    parse_noise_kind("gaussian");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_config);
  }
  CHECK(parse_noise_kind("broken-sensor") == NoiseKind::broken_sensor);
  CHECK(to_string(NoiseKind::bump) == "bump");
}
