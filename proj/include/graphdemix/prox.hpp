#pragma once

#include <algorithm>

#include "graphdemix/core.hpp"

namespace graphdemix {

inline double nuclear_norm(const CMat& m) {
  return Eigen::JacobiSVD<CMat>(m).singularValues().sum();
}

/// Sum of row Euclidean norms (convex surrogate for row support size).
inline double l21_norm(const CMat& m) {
  double acc = 0.0;
  for (Index i = 0; i < m.rows(); ++i) acc += m.row(i).norm();
  return acc;
}

inline RVec singular_values(const CMat& m) {
  return Eigen::JacobiSVD<CMat>(m).singularValues();
}

/// prox of tau_j-weighted nuclear norm: soft-thresholds the j-th singular
/// value by tau_j.  Exact prox when tau is nondecreasing (thresholding then
/// preserves the singular-value ordering).
inline CMat svt_weighted(const CMat& y, const RVec& taus) {
  Eigen::JacobiSVD<CMat> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RVec s = svd.singularValues();
  if (taus.size() != s.size())
    throw parameter_error("svt_weighted: one threshold per singular value");
  for (Index j = 0; j < s.size(); ++j) s(j) = std::max(s(j) - taus(j), 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().adjoint();
}

/// prox of tau*||.||_* (singular-value soft-thresholding).
inline CMat svt(const CMat& y, double tau) {
  if (tau < 0) throw parameter_error("svt: threshold must be >= 0");
  return svt_weighted(y, RVec::Constant(std::min(y.rows(), y.cols()), tau));
}

/// prox of tau*||.||_{2,1}: per-row norm shrinkage
/// row -> max(1 - tau/||row||, 0) * row.
inline CMat row_soft_threshold(const CMat& y, double tau) {
  if (tau < 0)
    throw parameter_error("row_soft_threshold: threshold must be >= 0");
  CMat x = y;
  for (Index i = 0; i < x.rows(); ++i) {
    const double nrm = x.row(i).norm();
    if (nrm <= tau)
      x.row(i).setZero();
    else
      x.row(i) *= (1.0 - tau / nrm);
  }
  return x;
}

/// prox of sum_i tau_i*||row_i||: row shrinkage with one threshold per row
/// (separable across rows, so the uniform-threshold formula applies rowwise).
inline CMat row_soft_threshold_weighted(const CMat& y, const RVec& taus) {
  if (taus.size() != y.rows())
    throw parameter_error("row_soft_threshold_weighted: one threshold per row");
  CMat x = y;
  for (Index i = 0; i < x.rows(); ++i) {
    const double tau = taus(i);
    if (tau < 0)
      throw parameter_error(
          "row_soft_threshold_weighted: thresholds must be >= 0");
    const double nrm = x.row(i).norm();
    if (nrm <= tau)
      x.row(i).setZero();
    else
      x.row(i) *= (1.0 - tau / nrm);
  }
  return x;
}

}  // namespace graphdemix
