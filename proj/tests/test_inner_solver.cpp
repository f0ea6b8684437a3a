#include <doctest.h>

#include <numeric>
#include <vector>

#include "rdmd/exp_basis.hpp"
#include "rdmd/inner_solver.hpp"
#include "rdmd/synth_data.hpp"
#include "test_util.hpp"

using namespace rdmd;

namespace {

CMatrix well_conditioned_phi(Rng& rng, Eigen::Index m, Eigen::Index k) {
  RVector t = RVector::LinSpaced(m, 0.0, 2.0);
  CVector alpha(k);
  for (Eigen::Index j = 0; j < k; ++j) alpha(j) = Complex(-0.3 + 0.2 * rng.normal(), 1.5 * static_cast<double>(j) - 1.0);
  return build_phi(alpha, TimeGrid(t)).values;
}

}  // namespace

TEST_CASE("solve_column_ls") {
  Rng rng(31);
  SUBCASE("data in the range of phi") {
    const CMatrix phi = well_conditioned_phi(rng, 12, 3);
    const CVector x = phi * testutil::random_cvector(rng, 3);
    CHECK((x - phi * solve_column_ls(x, phi)).norm() < 1e-10);
  }
  SUBCASE("orthonormal columns reduce to the adjoint") {
    const CMatrix q = testutil::random_cmatrix(rng, 9, 3).householderQr().householderQ() * CMatrix::Identity(9, 3);
    const CVector x = testutil::random_cvector(rng, 9);
    CHECK((solve_column_ls(x, q) - q.adjoint() * x).norm() < 1e-12);
  }
  SUBCASE("normal-equations oracle") {
    for (int i = 0; i < 20; ++i) {
      const CMatrix phi = testutil::random_cmatrix(rng, 8, 3);
      const CVector x = testutil::random_cvector(rng, 8);
      const CVector normal = (phi.adjoint() * phi).ldlt().solve(phi.adjoint() * x);
      CHECK(testutil::rel_err(solve_column_ls(x, phi), normal) < 1e-8);
    }
  }
  SUBCASE("rank deficient basis gives the minimum-norm solution") {
    CMatrix phi(4, 2);
    phi.col(0) = testutil::random_cvector(rng, 4);
    phi.col(1) = phi.col(0);
    const CVector x = testutil::random_cvector(rng, 4);
    const CVector b = solve_column_ls(x, phi);
    CHECK(std::abs(b(0) - b(1)) < 1e-12);
  }
}

TEST_CASE("column objective gradient matches finite differences") {
  Rng rng(7);
  const double h = 1e-6;
  for (int trial = 0; trial < 40; ++trial) {
    const bool huber = trial % 2 == 1;
    const CMatrix phi = testutil::random_cmatrix(rng, 10, 3);
    const CVector x = testutil::random_cvector(rng, 10, 2.0);
    const CVector b = testutil::random_cvector(rng, 3, 0.5);
    const Penalty pen = huber ? Penalty::huber(1.0) : Penalty::least_squares();
    const auto q = trial % 4 == 3 ? SmoothSeparableReg::ridge(0.2) : SmoothSeparableReg::zero();
    const double weight = 0.25 + 0.75 * rng.uniform();
    ColumnSubproblem prob{x, phi, weight, pen, q};
    if (huber) {
      // Stay away from the kink so central differences are meaningful.
      const CVector r = x - phi * b;
      if ((r.cwiseAbs().array() - 1.0).abs().minCoeff() < 1e-3) continue;
    }
    const CVector g = column_objective(prob, b).second;
    const RVector v = to_real(b);
    RVector fd(v.size());
    for (Eigen::Index c = 0; c < v.size(); ++c) {
      RVector p = v, m = v;
      p(c) += h;
      m(c) -= h;
      fd(c) = (column_objective(prob, to_complex(p)).first - column_objective(prob, to_complex(m)).first) / (2 * h);
    }
    CHECK(testutil::rel_err(fd, to_real(g)) < (huber ? 1e-5 : 1e-6));
  }
}

TEST_CASE("solve_column_bfgs") {
  Rng rng(17);
  const CMatrix phi = well_conditioned_phi(rng, 15, 3);
  const CVector x = phi * testutil::random_cvector(rng, 3) + testutil::random_cvector(rng, 15, 0.1);
  const auto q0 = SmoothSeparableReg::zero();
  const CVector b_ls = solve_column_ls(x, phi);

  SUBCASE("least squares matches the closed form") {
    const Penalty ls = Penalty::least_squares();
    const auto sol = solve_column_bfgs({x, phi, 1.0, ls, q0}, CVector::Zero(3));
    CHECK(sol.converged);
    CHECK(testutil::rel_err(sol.b, b_ls) < 1e-6);
  }
  SUBCASE("huber with a large threshold matches least squares") {
    const double kappa = 1.01 * (x - phi * b_ls).cwiseAbs().maxCoeff();
    const Penalty hub = Penalty::huber(kappa);
    const auto sol = solve_column_bfgs({x, phi, 1.0, hub, q0}, CVector::Zero(3));
    CHECK(testutil::rel_err(sol.b, b_ls) < 1e-6);
  }
  SUBCASE("zero weight is degenerate") {
    const Penalty hub = Penalty::huber(0.1);
    const CVector init = testutil::random_cvector(rng, 3);
    const auto sol = solve_column_bfgs({x, phi, 0.0, hub, q0}, init);
    CHECK(sol.degenerate);
    CHECK(sol.b == init);
    CHECK(sol.iterations == 0);
  }
  SUBCASE("ridge matches the regularized normal equations") {
    const Penalty ls = Penalty::least_squares();
    const auto q = SmoothSeparableReg::ridge(0.5);
    const auto sol = solve_column_bfgs({x, phi, 1.0, ls, q}, CVector::Zero(3));
    const CVector expect =
        (phi.adjoint() * phi + 0.5 * CMatrix::Identity(3, 3)).ldlt().solve(phi.adjoint() * x);
    CHECK(testutil::rel_err(sol.b, expect) < 1e-6);
  }
  SUBCASE("descent and stopping rule") {
    const Penalty hub = Penalty::huber(0.05);
    const CVector init = CVector::Zero(3);
    ColumnSubproblem prob{x, phi, 0.8, hub, q0};
    InnerOptions opt;
    const auto sol = solve_column_bfgs(prob, init, nullptr, opt);
    CHECK(sol.converged);
    CHECK(sol.objective <= column_objective(prob, init).first);
    const auto [f, g] = column_objective(prob, sol.b);
    CHECK(f == doctest::Approx(sol.objective).epsilon(1e-14));
    CHECK(to_real(g).norm() <= opt.tol * (1.0 + std::abs(f)));
    // Robust fit cannot do worse on its own objective than the LS coefficients.
    CHECK(sol.objective <= column_objective(prob, b_ls).first + 1e-12);
  }
  SUBCASE("invalid weight") {
    const Penalty ls = Penalty::least_squares();
    CHECK_THROWS_AS(solve_column_bfgs({x, phi, 1.5, ls, q0}, CVector::Zero(3)), Error);
  }
}

TEST_CASE("solve_all_columns") {
  Rng rng(23);
  const CMatrix phi = well_conditioned_phi(rng, 16, 2);
  const auto q0 = SmoothSeparableReg::zero();

  SUBCASE("identical columns give identical coefficients") {
    const CVector x = testutil::random_cvector(rng, 16);
    CMatrix X(16, 5);
    for (Eigen::Index j = 0; j < 5; ++j) X.col(j) = x;
    InnerOptions cold;
    cold.warm = WarmPolicy::cold;
    const auto sweep = solve_all_columns(X, phi, RVector::Ones(5), Penalty::huber(0.3), q0, cold);
    for (Eigen::Index j = 1; j < 5; ++j) CHECK(sweep.B.col(j) == sweep.B.col(0));
  }
  SUBCASE("least squares equals the pseudo-inverse") {
    const CMatrix X = testutil::random_cmatrix(rng, 16, 7);
    const auto sweep = solve_all_columns(X, phi, RVector::Ones(7), Penalty::least_squares(), q0);
    const CMatrix expect = phi.completeOrthogonalDecomposition().pseudoInverse() * X;
    CHECK(testutil::rel_err(sweep.B, expect) < 1e-10);
    CHECK(sweep.solves == 7);
  }
  SUBCASE("permuting columns permutes the solution (cold starts)") {
    const CMatrix X = phi * testutil::random_cmatrix(rng, 2, 6) + testutil::random_cmatrix(rng, 16, 6, 0.3);
    std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};
    CMatrix Xp(16, 6);
    for (Eigen::Index l = 0; l < 6; ++l) Xp.col(l) = X.col(perm[static_cast<std::size_t>(l)]);
    InnerOptions cold;
    cold.warm = WarmPolicy::cold;
    const Penalty hub = Penalty::huber(0.2);
    const auto a = solve_all_columns(X, phi, RVector::Ones(6), hub, q0, cold);
    const auto b = solve_all_columns(Xp, phi, RVector::Ones(6), hub, q0, cold);
    for (Eigen::Index l = 0; l < 6; ++l) CHECK(b.B.col(l) == a.B.col(perm[static_cast<std::size_t>(l)]));
  }
  SUBCASE("parallel workers reproduce the sequential result") {
    const CMatrix X = phi * testutil::random_cmatrix(rng, 2, 40) + testutil::random_cmatrix(rng, 16, 40, 0.3);
    const Penalty hub = Penalty::huber(0.2);
    for (WarmPolicy policy : {WarmPolicy::cold, WarmPolicy::chain}) {
      InnerOptions one, four;
      one.warm = four.warm = policy;
      four.workers = 4;
      const auto a = solve_all_columns(X, phi, RVector::Ones(40), hub, q0, one);
      const auto b = solve_all_columns(X, phi, RVector::Ones(40), hub, q0, four);
      if (policy == WarmPolicy::cold) {
        CHECK(a.B == b.B);
        CHECK(a.iterations == b.iterations);
      } else {
        CHECK(testutil::rel_err(a.B, b.B) < 1e-6);
      }
    }
  }
  SUBCASE("subset solve and degenerate columns") {
    const CMatrix X = testutil::random_cmatrix(rng, 16, 4);
    RVector w = RVector::Ones(4);
    w(2) = 0.0;
    const std::vector<Eigen::Index> cols{1, 2};
    const auto sweep = solve_columns(X, phi, w, Penalty::huber(0.5), q0, cols);
    CHECK(sweep.B.cols() == 2);
    REQUIRE(sweep.degenerate.size() == 1);
    CHECK(sweep.degenerate[0] == 2);
    const std::vector<Eigen::Index> bad{4};
    CHECK_THROWS_AS(solve_columns(X, phi, w, Penalty::huber(0.5), q0, bad), Error);
  }
  SUBCASE("column errors carry the column index") {
    CMatrix X = testutil::random_cmatrix(rng, 16, 3);
    X(4, 1) = Complex(std::nan(""), 0.0);
    try {
      solve_all_columns(X, phi, RVector::Ones(3), Penalty::huber(0.5), q0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("column 1") != std::string::npos);
    }
  }
}

TEST_CASE("chained warm starts save inner iterations over a perturbed sweep") {
  HiddenDynamicsSpec spec;
  NoiseSpec noise;
  noise.kind = NoiseKind::broken_sensor;
  noise.sigma = 1e-3;
  noise.mu = 1.0;
  noise.seed = 5;
  const auto data = corrupt(gen_hidden(spec), noise, spec.spatial_grid());
  CVector alpha = spec.truth();
  alpha(0) += Complex(0.05, -0.05);
  alpha(2) += Complex(-0.03, 0.02);
  const CMatrix phi = build_phi(alpha, TimeGrid(data.times)).values;
  InnerOptions cold, chain;
  cold.warm = WarmPolicy::cold;
  chain.warm = WarmPolicy::chain;
  const Penalty hub = Penalty::huber(5e-3);
  const RVector w = RVector::Ones(data.cols());
  const auto a = solve_all_columns(data.values, phi, w, hub, SmoothSeparableReg::zero(), cold);
  const auto b = solve_all_columns(data.values, phi, w, hub, SmoothSeparableReg::zero(), chain);
  MESSAGE("cold " << a.iterations << ", chained " << b.iterations);
  CHECK(static_cast<double>(b.iterations) <= 0.7 * static_cast<double>(a.iterations));
}
