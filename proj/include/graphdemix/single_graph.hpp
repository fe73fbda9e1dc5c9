#pragma once

#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/model.hpp"
#include "graphdemix/solver.hpp"

namespace graphdemix {

/// Which transforms orthogonalize the planted factors: T_x = I when supports
/// are disjoint, T_x = U when the frequency signatures are orthogonal;
/// likewise T_h = I for orthogonal raw taps, T_h = psi_raw for orthogonal
/// frequency responses.
enum class TransformChoice { identity, gft };

struct SeparationSpec {
  TransformChoice tx = TransformChoice::identity;
  TransformChoice th = TransformChoice::identity;
  Index r = 1;
};

enum class Domain { node, spectral };

struct OrthogonalityReport {
  bool ok = false;
  double max_abs_inner = 0.0;
};

/// Pairwise inner products (Hermitian; coincides with the plain transpose for
/// real data).  domain = spectral first maps signals through U or taps
/// through psi_raw, chosen by vector length.
inline OrthogonalityReport check_orthogonality(const std::vector<CVec>& vectors,
                                               Domain domain,
                                               const SpectralBasis& basis) {
  if (vectors.size() < 2)
    throw parameter_error("check_orthogonality: need at least 2 vectors");
  const Index len = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != len)
      throw parameter_error("check_orthogonality: vectors differ in length");
  std::vector<CVec> t = vectors;
  if (domain == Domain::spectral) {
    if (len == basis.n) {
      for (auto& v : t) v = basis.u * v;
    } else if (len == basis.l) {
      for (auto& v : t) v = basis.psi_raw * v;
    } else {
      throw parameter_error(
          "check_orthogonality: spectral domain needs signal (N) or tap (L) "
          "length");
    }
  }
  OrthogonalityReport rep;
  rep.ok = true;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double inner = std::abs(t[i].dot(t[j]));  // conjugating inner
      rep.max_abs_inner = std::max(rep.max_abs_inner, inner);
      if (inner > 1e-8 * t[i].norm() * t[j].norm()) rep.ok = false;
    }
  return rep;
}

struct SeparationResult {
  std::vector<CMat> components;  ///< decreasing singular value order
  bool tie_warning = false;      ///< singular-value gap below 1e-10 relative
  double min_rel_gap = 0.0;
};

/// Splits z (raw-tap convention, z = sum_i x_i h_i^T) into its r rank-1
/// pieces via the SVD of T = T_x z T_h^T:  Z^_i = s_i (T_x^+ l_i)(T_h^+ r_i)^T.
/// Exact when the transformed factors are orthogonal with distinct products
/// ||T_x x_i|| * ||T_h h_i||.
inline SeparationResult separate_svd(const CMat& z, const SeparationSpec& spec,
                                     const SpectralBasis& basis) {
  if (z.norm() == 0.0)
    throw degenerate_error("separate_svd: zero matrix has no components");
  if (z.rows() != basis.n || z.cols() != basis.l)
    throw parameter_error("separate_svd: matrix shape mismatch with basis");
  if (spec.r < 1 || spec.r > std::min(z.rows(), z.cols()))
    throw parameter_error("separate_svd: need 1 <= r <= min(N, L)");

  CMat t = z;
  if (spec.tx == TransformChoice::gft) t = basis.u * t;
  if (spec.th == TransformChoice::gft) t = t * basis.psi_raw.transpose();

  Eigen::JacobiSVD<CMat> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec s = svd.singularValues();

  SeparationResult res;
  res.min_rel_gap = std::numeric_limits<double>::infinity();
  const double s1 = s(0);
  for (Index i = 0; i + 1 < std::min<Index>(spec.r + 1, s.size()); ++i) {
    const double gap = s1 > 0 ? (s(i) - s(i + 1)) / s1 : 0.0;
    res.min_rel_gap = std::min(res.min_rel_gap, gap);
  }
  res.tie_warning = res.min_rel_gap <= 1e-10;

  // Pseudoinverse factors.  U^+ = V/N exactly (U = sqrt(N) x unitary^H);
  // psi_raw^+ by SVD.
  CMat pinv_th;
  if (spec.th == TransformChoice::gft)
    pinv_th = basis.psi_raw.completeOrthogonalDecomposition().pseudoInverse();

  for (Index i = 0; i < spec.r; ++i) {
    CVec left = svd.matrixU().col(i);
    CVec right = svd.matrixV().col(i).conjugate();  // t = sum s_i l_i r_i^T
    if (spec.tx == TransformChoice::gft)
      left = (basis.v * left) / static_cast<double>(basis.n);
    if (spec.th == TransformChoice::gft) right = pinv_th * right;
    res.components.push_back(s(i) * left * right.transpose());
  }
  return res;
}

/// Two-step single-graph pipeline: sum-formulation solve, SVD separation,
/// per-component factor extraction.  The returned zs use the solver's
/// orthonormal-tap convention; xs_hat/hs_hat are raw.
inline LiftedSolution demix_single_graph(const DemixProblem& p,
                                         const SolverConfig& cfg,
                                         const SeparationSpec& spec,
                                         SolveMethod method = SolveMethod::convex) {
  if (!p.single_graph())
    throw model_error("demix_single_graph: bases are not identical");
  const auto& basis = *p.bases.front();
  SumSolution sum = solve_single_graph_sum(p, cfg, method);

  LiftedSolution sol;
  sol.objective = sum.objective;
  sol.primal_residual = sum.primal_residual;
  sol.dual_residual = sum.dual_residual;
  sol.iterations = sum.iterations;
  sol.converged = sum.converged;
  sol.feasibility = sum.feasibility;
  sol.numeric_warning = sum.numeric_warning;
  sol.objective_trace = std::move(sum.objective_trace);
  sol.surrogate_trace = std::move(sum.surrogate_trace);

  if (sum.z.norm() == 0.0) {
    for (Index i = 0; i < spec.r; ++i) {
      sol.zs.push_back(CMat::Zero(basis.n, basis.l));
      sol.xs_hat.push_back(CVec::Zero(basis.n));
      sol.hs_hat.push_back(CVec::Zero(basis.l));
    }
    return sol;
  }

  // The sum variable carries orthonormal-basis taps; separation is defined on
  // raw-tap outer products:  Z_raw = Z' tap_transform^{-T}.
  if (!basis.tap_transform_invertible)
    throw numeric_error("demix_single_graph: tap transform is singular");
  const CMat z_raw = basis.tap_transform.triangularView<Eigen::Upper>()
                         .solve(sum.z.transpose())
                         .transpose();
  SeparationResult sep = separate_svd(z_raw, spec, basis);
  sol.numeric_warning = sol.numeric_warning || sep.tie_warning;

  for (const CMat& comp_raw : sep.components) {
    const CMat comp_prime = comp_raw * basis.tap_transform.transpose();
    sol.zs.push_back(comp_prime);
    if (comp_prime.norm() == 0.0) {
      sol.xs_hat.push_back(CVec::Zero(basis.n));
      sol.hs_hat.push_back(CVec::Zero(basis.l));
    } else {
      auto [x, h] = extract_rank1(comp_prime, basis);
      sol.xs_hat.push_back(std::move(x));
      sol.hs_hat.push_back(std::move(h));
    }
  }
  return sol;
}

}  // namespace graphdemix
