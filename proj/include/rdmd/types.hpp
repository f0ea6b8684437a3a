#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rdmd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Error categories surfaced by the library. The CLI maps these to exit codes.
enum class ErrorKind {
  invalid_input,
  overflow,
  invalid_config,
  parse,
  format,
  solver,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& msg) { return Error(ErrorKind::invalid_input, msg); }
inline Error invalid_config(const std::string& msg) { return Error(ErrorKind::invalid_config, msg); }

/// Snapshot data: row i of `values` is the system state sampled at `times[i]`.
struct SnapshotMatrix {
  RVector times;
  CMatrix values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Stack a complex vector as [real parts; imaginary parts].
inline RVector to_real(const CVector& z) {
  RVector out(2 * z.size());
  out.head(z.size()) = z.real();
  out.tail(z.size()) = z.imag();
  return out;
}

/// Inverse of to_real.
inline CVector to_complex(const RVector& v) {
  const Eigen::Index k = v.size() / 2;
  CVector out(k);
  for (Eigen::Index j = 0; j < k; ++j) out(j) = Complex(v(j), v(k + j));
  return out;
}

}  // namespace rdmd
