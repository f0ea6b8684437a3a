#include "rdmd/synth_data.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "rdmd/rng.hpp"

namespace rdmd {

CVector PeriodicSystemSpec::truth() const {
  return Eigen::EigenSolver<Eigen::Matrix2d>(system).eigenvalues();
}

RVector HiddenDynamicsSpec::spatial_grid() const {
  return RVector::LinSpaced(points, 0.0, y_max);
}

CVector HiddenDynamicsSpec::truth() const {
  CVector t(4);
  t << Complex(gamma1, omega1), Complex(gamma1, -omega1), Complex(gamma2, omega2), Complex(gamma2, -omega2);
  return t;
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "sparse") return NoiseKind::sparse;
  if (name == "broken-sensor" || name == "broken_sensor") return NoiseKind::broken_sensor;
  if (name == "bump") return NoiseKind::bump;
  throw invalid_config("unknown noise kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::sparse: return "sparse";
    case NoiseKind::broken_sensor: return "broken-sensor";
    case NoiseKind::bump: return "bump";
  }
  return "?";
}

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw invalid_config("noise sigma must be >= 0");
  if (!std::isfinite(mu)) throw invalid_config("spike size must be finite");
  if (!(p >= 0.0 && p <= 1.0)) throw invalid_config("spike rate must lie in [0, 1]");
  if (kind == NoiseKind::bump) {
    if (!(width > 0.0)) throw invalid_config("bump width must be positive");
    if (!std::isfinite(amplitude)) throw invalid_config("bump amplitude must be finite");
  }
}

SnapshotMatrix gen_periodic(const PeriodicSystemSpec& spec, Eigen::Index m) {
  if (m < 1) throw invalid_input("need at least one snapshot");
  SnapshotMatrix out;
  out.times = RVector::LinSpaced(m, 0.0, spec.dt * static_cast<double>(m - 1));
  out.values.resize(m, 2);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Matrix2d step = (spec.system * out.times(j)).exp();
    out.values.row(j) = (step * spec.x0).cast<Complex>().transpose();
  }
  return out;
}

SnapshotMatrix gen_hidden(const HiddenDynamicsSpec& spec) {
  if (spec.points < 1 || spec.snapshots < 1) throw invalid_input("hidden-dynamics grid must be nonempty");
  const RVector y = spec.spatial_grid();
  SnapshotMatrix out;
  out.times.resize(spec.snapshots);
  for (Eigen::Index j = 0; j < spec.snapshots; ++j) out.times(j) = static_cast<double>(j) * spec.dt;
  out.values.resize(spec.snapshots, spec.points);
  for (Eigen::Index j = 0; j < spec.snapshots; ++j) {
    const double t = out.times(j);
    const double g1 = std::exp(spec.gamma1 * t);
    const double g2 = std::exp(spec.gamma2 * t);
    for (Eigen::Index i = 0; i < spec.points; ++i) {
      out.values(j, i) = std::sin(spec.k1 * y(i) - spec.omega1 * t) * g1 +
                         std::sin(spec.k2 * y(i) - spec.omega2 * t) * g2;
    }
  }
  return out;
}

SnapshotMatrix corrupt(const SnapshotMatrix& clean, const NoiseSpec& noise, const std::optional<RVector>& space) {
  noise.validate();
  const Eigen::Index m = clean.rows();
  const Eigen::Index n = clean.cols();
  SnapshotMatrix out = clean;
  Rng rng(noise.seed);

  switch (noise.kind) {
    case NoiseKind::sparse:
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double g = rng.normal();
          const double s = rng.bernoulli(noise.p) ? rng.normal() : 0.0;
          out.values(i, j) += noise.sigma * g + noise.mu * s;
        }
      }
      break;

    case NoiseKind::broken_sensor: {
      // One sensor subset per trial; its spikes persist across all snapshots.
      std::vector<char> broken(n);
      for (Eigen::Index j = 0; j < n; ++j) broken[j] = rng.bernoulli(noise.p);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double g = rng.normal();
          const double s = broken[j] ? rng.normal() : 0.0;
          out.values(i, j) += noise.sigma * g + noise.mu * s;
        }
      }
      break;
    }

    case NoiseKind::bump: {
      const RVector y = space ? *space : RVector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
      if (y.size() != n) throw invalid_input("spatial grid length does not match snapshot columns");
      const double dy = n > 1 ? y(1) - y(0) : 1.0;
      const double dt = m > 1 ? clean.times(1) - clean.times(0) : 1.0;
      const double yb = noise.center_y.value_or(0.5 * (y(0) + y(n - 1)));
      const double tb = noise.center_t.value_or(0.5 * (clean.times(0) + clean.times(m - 1)));
      for (Eigen::Index i = 0; i < m; ++i) {
        const double et = (tb - clean.times(i)) / (noise.width * dt);
        for (Eigen::Index j = 0; j < n; ++j) {
          const double ey = (yb - y(j)) / (noise.width * dy);
          out.values(i, j) += noise.sigma * rng.normal() + noise.amplitude * std::exp(-ey * ey - et * et);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace rdmd
