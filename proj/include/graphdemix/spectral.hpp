#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/graph.hpp"

namespace graphdemix {

/// Eigendecomposition of a GSO plus the derived Fourier machinery.
///
/// Conventions (fixed so the vertex- and frequency-domain formulas agree
/// exactly):
///   v = sqrt(N) * (unitary eigenvector matrix)   inverse GFT:  x = v x^ / N
///   u = v^H, so u^H u = N I and u v = N I        signal GFT:   x^ = u x
///   psi_raw(i,j) = lambda_i^j                    tap GFT:      h^ = psi_raw h
///   psi = column-orthonormalized psi_raw; psi_raw = psi * tap_transform with
///   tap_transform upper triangular, real positive diagonal.
/// Solvers work with orthonormal-basis taps h' = tap_transform h.
struct SpectralBasis {
  Index n = 0;
  Index l = 0;
  CVec eigvals;
  CMat v;
  CMat u;
  CMat psi_raw;
  CMat psi;
  CMat tap_transform;
  bool distinct_eigvals = false;
  double min_eig_gap = 0.0;
  bool tap_transform_invertible = false;

  CVec to_orthonormal_taps(const CVec& h) const {
    if (h.size() != l)
      throw parameter_error("to_orthonormal_taps: tap length mismatch");
    return tap_transform * h;
  }

  CVec to_raw_taps(const CVec& h_prime) const {
    if (h_prime.size() != l)
      throw parameter_error("to_raw_taps: tap length mismatch");
    if (!tap_transform_invertible)
      throw numeric_error(
          "to_raw_taps: tap transform is singular (repeated eigenvalues?)");
    return tap_transform.triangularView<Eigen::Upper>().solve(h_prime);
  }
};

inline SpectralBasis decompose(const Gso& s, Index l) {
  const Index n = s.n();
  if (l < 1 || l > n)
    throw parameter_error("decompose: need 1 <= l <= n");
  if (!s.normal)
    throw model_error(
        "decompose: shift operator is not normal (S S^H != S^H S); "
        "no orthonormal eigenbasis exists");

  CVec lam(n);
  CMat vu(n, n);
  if (s.hermitian) {
    Eigen::SelfAdjointEigenSolver<CMat> es(s.matrix);
    if (es.info() != Eigen::Success)
      throw numeric_error("decompose: hermitian eigensolver failed");
    lam = es.eigenvalues().cast<Complex>();
    vu = es.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<CMat> es(s.matrix);
    if (es.info() != Eigen::Success)
      throw numeric_error("decompose: complex eigensolver failed");
    lam = es.eigenvalues();
    vu = es.eigenvectors();
  }

  // Deterministic ordering: ascending by (Re, Im).
  std::vector<Index> ord(static_cast<std::size_t>(n));
  std::iota(ord.begin(), ord.end(), Index{0});
  std::stable_sort(ord.begin(), ord.end(), [&](Index a, Index b) {
    if (lam(a).real() != lam(b).real()) return lam(a).real() < lam(b).real();
    return lam(a).imag() < lam(b).imag();
  });

  SpectralBasis b;
  b.n = n;
  b.l = l;
  b.eigvals.resize(n);
  CMat q(n, n);
  for (Index k = 0; k < n; ++k) {
    b.eigvals(k) = lam(ord[static_cast<std::size_t>(k)]);
    CVec col = vu.col(ord[static_cast<std::size_t>(k)]);
    col.normalize();
    // Phase fix: largest-magnitude entry (first among ties) made real
    // positive, for run-to-run determinism.
    Index imax = 0;
    double best = 0.0;
    for (Index i = 0; i < n; ++i)
      if (std::abs(col(i)) > best) {
        best = std::abs(col(i));
        imax = i;
      }
    if (best > 0.0) col *= std::conj(col(imax)) / std::abs(col(imax));
    q.col(k) = col;
  }

  // The frequency formulas below assume an orthonormal eigenbasis; the
  // complex solver can fail to deliver one near eigenvalue ties.
  const double ortho = (q.adjoint() * q - CMat::Identity(n, n)).norm();
  if (ortho > 1e-8 * static_cast<double>(n))
    throw numeric_error(
        "decompose: eigenvectors not orthonormal (residual " +
        std::to_string(ortho) + "); eigenvalues too close for a stable basis");

  const double sqn = std::sqrt(static_cast<double>(n));
  b.v = sqn * q;
  b.u = b.v.adjoint();

  b.psi_raw.resize(n, l);
  b.psi_raw.col(0).setOnes();
  for (Index j = 1; j < l; ++j)
    b.psi_raw.col(j) = b.psi_raw.col(j - 1).cwiseProduct(b.eigvals);

  Eigen::HouseholderQR<CMat> qr(b.psi_raw);
  b.psi = qr.householderQ() * CMat::Identity(n, l);
  b.tap_transform =
      qr.matrixQR().topLeftCorner(l, l).triangularView<Eigen::Upper>();
  double min_diag = std::numeric_limits<double>::infinity();
  double max_diag = 0.0;
  for (Index j = 0; j < l; ++j) {
    const Complex d = b.tap_transform(j, j);
    const double a = std::abs(d);
    if (a > 0.0) {
      const Complex ph = d / a;
      b.psi.col(j) *= ph;
      b.tap_transform.row(j) *= std::conj(ph);
    }
    min_diag = std::min(min_diag, a);
    max_diag = std::max(max_diag, a);
  }
  b.tap_transform_invertible =
      max_diag > 0.0 && min_diag > 1e-13 * max_diag;

  double gap = std::numeric_limits<double>::infinity();
  double maxabs = 0.0;
  for (Index i = 0; i < n; ++i) {
    maxabs = std::max(maxabs, std::abs(b.eigvals(i)));
    for (Index j = i + 1; j < n; ++j)
      gap = std::min(gap, std::abs(b.eigvals(i) - b.eigvals(j)));
  }
  b.min_eig_gap = n < 2 ? std::numeric_limits<double>::infinity() : gap;
  b.distinct_eigvals = n < 2 || gap > 1e-8 * maxabs;
  return b;
}

/// y = sum_l h_l S^l x by iterated shifting (S^l never formed).
inline CVec apply_filter_vertex(const Gso& s, const CVec& h, const CVec& x) {
  const Index n = s.n();
  if (x.size() != n)
    throw parameter_error("apply_filter_vertex: signal length mismatch");
  if (h.size() < 1 || h.size() > n)
    throw parameter_error("apply_filter_vertex: need 1 <= L <= n taps");
  CVec acc = CVec::Zero(n);
  CVec cur = x;
  for (Index l = 0; l < h.size(); ++l) {
    acc += h(l) * cur;
    if (l + 1 < h.size()) cur = s.matrix * cur;
  }
  return acc;
}

inline CVec gft_signal(const SpectralBasis& b, const CVec& x) {
  if (x.size() != b.n) throw parameter_error("gft_signal: length mismatch");
  return b.u * x;
}

inline CVec igft_signal(const SpectralBasis& b, const CVec& xhat) {
  if (xhat.size() != b.n)
    throw parameter_error("igft_signal: length mismatch");
  return (b.v * xhat) / static_cast<double>(b.n);
}

/// Frequency response of raw taps h on the eigenvalue grid.
inline CVec filter_response(const SpectralBasis& b, const CVec& h) {
  if (h.size() != b.l)
    throw parameter_error("filter_response: tap length mismatch");
  return b.psi_raw * h;
}

/// y = v diag(psi_raw h) u x / N; equals the vertex-domain filter.
inline CVec apply_filter_spectral(const SpectralBasis& b, const CVec& h,
                                  const CVec& x) {
  return igft_signal(b, filter_response(b, h).cwiseProduct(gft_signal(b, x)));
}

/// Dense lifted operator M (N x N*L): M vec(x h'^T) equals the filter output
/// for orthonormal-basis taps h'.  vec stacks columns, so the coefficient of
/// Z(i,j) sits in column j*N + i, and row n of the frequency-domain factor is
/// kron(psi_n, u_n).
inline CMat transfer_matrix(const SpectralBasis& b) {
  const Index n = b.n, l = b.l;
  CMat a(n, n * l);
  for (Index j = 0; j < l; ++j)
    for (Index i = 0; i < n; ++i)
      a.col(j * n + i) = b.psi.col(j).cwiseProduct(b.u.col(i));
  return (b.v * a) / static_cast<double>(n);
}

}  // namespace graphdemix
