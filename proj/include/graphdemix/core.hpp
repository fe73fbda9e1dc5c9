#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#define GRAPHDEMIX_VERSION "0.1.0"

namespace graphdemix {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all library errors.
struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument or violated precondition.
struct parameter_error : error {
  using error::error;
};

/// Malformed input data; message carries the offending line when known.
struct parse_error : error {
  using error::error;
};

/// A modeling assumption does not hold (non-normal shift operator,
/// repeated eigenvalues, mismatched problem mode).
struct model_error : error {
  using error::error;
};

/// A numerical routine failed (eigensolver, factorization).
struct numeric_error : error {
  using error::error;
};

/// Degenerate input where a factorization is requested (e.g. a zero matrix).
struct degenerate_error : error {
  using error::error;
};

inline CVec to_complex(const RVec& x) { return x.cast<Complex>(); }
inline CMat to_complex(const RMat& x) { return x.cast<Complex>(); }

/// Largest |imag| entry, used to decide whether results of real-valued
/// problems may be reported as real.
inline double max_imag(const CMat& m) {
  return m.imag().cwiseAbs().maxCoeff();
}

}  // namespace graphdemix
