#include "rdmd/baselines_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace rdmd {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ExactDmdResult exact_dmd(const SnapshotMatrix& X, Eigen::Index rank) {
  const Eigen::Index m = X.rows();
  const Eigen::Index n = X.cols();
  if (m < 2) throw invalid_input("exact DMD needs at least two snapshots");
  if (X.times.size() != m) throw invalid_input("time vector length does not match snapshot rows");
  if (rank < 1 || rank > std::min(m - 1, n))
    throw invalid_config("exact DMD rank must satisfy 1 <= k <= min(m - 1, n)");
  const double dt = X.times(1) - X.times(0);
  if (!(dt > 0.0)) throw invalid_input("exact DMD needs increasing sample times");
  for (Eigen::Index i = 1; i < m; ++i) {
    if (std::abs((X.times(i) - X.times(i - 1)) - dt) > 1e-9)
      throw invalid_input("exact DMD needs equispaced samples (row " + std::to_string(i) + ")");
  }

  // States as columns: Y1 = [x_0 ... x_{m-2}], Y2 = [x_1 ... x_{m-1}].
  const CMatrix Y1 = X.values.topRows(m - 1).transpose();
  const CMatrix Y2 = X.values.bottomRows(m - 1).transpose();
  Eigen::BDCSVD<CMatrix> svd(Y1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const CMatrix U = svd.matrixU().leftCols(rank);
  const CMatrix V = svd.matrixV().leftCols(rank);
  const RVector s = svd.singularValues().head(rank);
  if (!(s(rank - 1) > 0.0)) throw invalid_input("exact DMD: snapshot matrix has rank below k");
  const CMatrix VSinv = V * s.cwiseInverse().cast<Complex>().asDiagonal();
  const CMatrix Atilde = U.adjoint() * Y2 * VSinv;
  Eigen::ComplexEigenSolver<CMatrix> eig(Atilde);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::solver, "exact DMD eigendecomposition failed");

  ExactDmdResult out;
  out.discrete = eig.eigenvalues();
  out.continuous = out.discrete.unaryExpr([dt](const Complex& mu) { return std::log(mu) / dt; });
  out.modes = Y2 * VSinv * eig.eigenvectors();
  return out;
}

namespace {

// Hungarian algorithm (potentials form) for a square cost matrix.
double min_cost_assignment(const RMatrix& cost) {
  const Eigen::Index k = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
  std::vector<Eigen::Index> p(k + 1, 0), way(k + 1, 0);
  std::vector<char> used(k + 1);
  for (Eigen::Index i = 1; i <= k; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = p[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (Eigen::Index j = 1; j <= k; ++j) total += cost(p[j] - 1, j - 1);
  return total;
}

}  // namespace

double eig_error_l1(const CVector& estimated, const CVector& truth) {
  const Eigen::Index k = truth.size();
  if (estimated.size() != k) throw invalid_input("eigenvalue sets differ in size");
  if (k == 0) return 0.0;
  RMatrix cost(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) cost(i, j) = std::abs(estimated(i) - truth(j));

  if (k > 8) return min_cost_assignment(cost);
  std::vector<Eigen::Index> perm(k);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) total += cost(perm[j], j);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CVector periodogram_peaks(const SnapshotMatrix& X, Eigen::Index rank, Eigen::Index oversample) {
  const Eigen::Index m = X.rows();
  if (m < 2) throw invalid_input("periodogram needs at least two snapshots");
  if (rank < 1) throw invalid_config("periodogram rank must be positive");
  if (oversample < 1) throw invalid_config("periodogram oversampling must be positive");
  std::vector<double> gaps(static_cast<std::size_t>(m - 1));
  for (Eigen::Index i = 0; i + 1 < m; ++i) gaps[static_cast<std::size_t>(i)] = std::abs(X.times(i + 1) - X.times(i));
  const double dt = median_over_trials(gaps);
  if (!(dt > 0.0)) throw invalid_input("periodogram needs distinct sample times");

  const double nyquist = kPi / dt;
  const Eigen::Index grid = oversample * m + 1;
  RVector omega = RVector::LinSpaced(grid, -nyquist, nyquist);
  RVector power(grid);
  for (Eigen::Index g = 0; g < grid; ++g) {
    CVector e(m);
    for (Eigen::Index i = 0; i < m; ++i) e(i) = std::exp(Complex(0.0, -omega(g) * X.times(i)));
    power(g) = (e.transpose() * X.values).squaredNorm();
  }

  std::vector<Eigen::Index> peaks;
  for (Eigen::Index g = 0; g < grid; ++g) {
    const bool left = g == 0 || power(g) >= power(g - 1);
    const bool right = g + 1 == grid || power(g) > power(g + 1);
    if (left && right) peaks.push_back(g);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](Eigen::Index a, Eigen::Index b) { return power(a) > power(b); });
  CVector alpha(rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    // Fewer peaks than requested: fill with spread frequencies.
    alpha(j) = j < static_cast<Eigen::Index>(peaks.size())
                   ? Complex(0.0, omega(peaks[static_cast<std::size_t>(j)]))
                   : Complex(0.0, nyquist * static_cast<double>(j + 1) / static_cast<double>(rank + 1));
  }
  return alpha;
}

double median_over_trials(std::span<const double> errors) {
  if (errors.empty()) throw invalid_input("median of an empty list");
  std::vector<double> v(errors.begin(), errors.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace rdmd
