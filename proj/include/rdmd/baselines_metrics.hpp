#pragma once

#include <span>

#include "rdmd/types.hpp"

namespace rdmd {

struct ExactDmdResult {
  CVector continuous;  ///< log(discrete) / dt, principal branch
  CVector discrete;
  CMatrix modes;       ///< n x k
};

/// Exact DMD of equispaced snapshots (rows of X are consecutive states).
ExactDmdResult exact_dmd(const SnapshotMatrix& X, Eigen::Index rank);

/// Purely oscillatory guesses i*omega at the `rank` strongest local maxima of
/// the summed periodogram sum_j |sum_i x_ij exp(-i omega t_i)|^2, scanned on
/// a grid over [-pi/dt, pi/dt] with `oversample` points per DFT bin.
CVector periodogram_peaks(const SnapshotMatrix& X, Eigen::Index rank, Eigen::Index oversample = 8);

/// Minimum over pairings of sum_j |estimated_pi(j) - truth_j|.
double eig_error_l1(const CVector& estimated, const CVector& truth);

double median_over_trials(std::span<const double> errors);

}  // namespace rdmd
