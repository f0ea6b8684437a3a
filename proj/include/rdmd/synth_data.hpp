#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "rdmd/types.hpp"

namespace rdmd {

/// x' = A x sampled every dt from x(0) = x0.
struct PeriodicSystemSpec {
  double dt = 0.1;
  Eigen::Vector2d x0{1.0, 0.1};
  Eigen::Matrix2d system = (Eigen::Matrix2d() << 1.0, -2.0, 1.0, -1.0).finished();

  CVector truth() const;
};

/// Two translating sinusoids, one growing and one decaying.
struct HiddenDynamicsSpec {
  double k1 = 1.0, omega1 = 1.0, gamma1 = 1.0;
  double k2 = 0.4, omega2 = 3.7, gamma2 = -0.2;
  Eigen::Index points = 300;
  double y_max = 15.0;
  Eigen::Index snapshots = 128;
  double dt = std::numbers::pi / 254.0;

  RVector spatial_grid() const;
  CVector truth() const;
};

enum class NoiseKind { sparse, broken_sensor, bump };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::sparse;
  double sigma = 0.0;       ///< background level
  double mu = 0.0;          ///< spike size
  double p = 0.05;          ///< spike rate (entries) or broken-sensor fraction
  double amplitude = 1.0;   ///< bump height A
  double width = 10.0;      ///< bump width w, in grid spacings
  std::optional<double> center_y;  ///< defaults to the spatial midpoint
  std::optional<double> center_t;  ///< defaults to the temporal midpoint
  std::uint64_t seed = 0;

  void validate() const;
};

SnapshotMatrix gen_periodic(const PeriodicSystemSpec& spec, Eigen::Index m);
SnapshotMatrix gen_hidden(const HiddenDynamicsSpec& spec);

/// Add seeded noise. Noise is real-valued. `space` gives the spatial
/// coordinate of each column (bump only); defaults to 0, 1, ..., n-1.
SnapshotMatrix corrupt(const SnapshotMatrix& clean, const NoiseSpec& noise,
                       const std::optional<RVector>& space = std::nullopt);

}  // namespace rdmd
