#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/random.hpp"
#include "graphdemix/spectral.hpp"

namespace graphdemix {

using BasisList = std::vector<std::shared_ptr<const SpectralBasis>>;

/// Planted sources: sparse signals x_i on supports and raw filter taps h_i.
struct GroundTruth {
  std::vector<RVec> xs;
  std::vector<RVec> hs;
  std::vector<std::vector<Index>> supports;

  Index r() const { return static_cast<Index>(xs.size()); }
};

/// Linear equality information from partially-known source entries: couples
/// consecutive known rows of one lifted variable Z_i (rows scale like
/// x_i[node] * h', so value_b * row_a = value_a * row_b).
struct KnownEntries {
  Index source = 0;
  std::vector<std::pair<Index, double>> entries;  // (node index, known value)
};

/// One demixing instance: R spectral bases (aliased in single-graph mode),
/// the observed mixture, and how it was observed.
struct DemixProblem {
  BasisList bases;
  CVec y;
  std::optional<std::vector<Index>> mask;
  double noise_sigma = 0.0;
  bool as2_mode = false;
  /// Per source, the resampled-with-replacement row indices of U (AS2 model);
  /// empty when as2_mode is false.
  std::vector<std::vector<Index>> as2_rows;
  std::uint64_t seed = 0;
  std::vector<KnownEntries> known_entries;

  Index r() const { return static_cast<Index>(bases.size()); }
  Index n() const { return bases.empty() ? 0 : bases.front()->n; }

  /// True when every source references one common basis (by identity or by
  /// identical content), enabling the sum formulation.
  bool single_graph() const {
    for (Index i = 1; i < r(); ++i) {
      if (bases[static_cast<std::size_t>(i)] == bases.front()) continue;
      const auto& a = *bases.front();
      const auto& b = *bases[static_cast<std::size_t>(i)];
      if (a.n != b.n || a.l != b.l) return false;
      if ((a.u - b.u).norm() != 0.0 || (a.psi - b.psi).norm() != 0.0)
        return false;
    }
    return true;
  }
};

enum class Orthogonality { none, prop1 };

namespace detail {

inline RVec nonzero_gaussian(Index n, std::mt19937_64& rng) {
  RVec v = gaussian_vector(n, rng);
  while (v.norm() == 0.0) v = gaussian_vector(n, rng);
  return v;
}

/// Raw tap sampler.  Coefficients are Gaussian in the orthonormalized-tap
/// coordinates and mapped back through the tap transform, so the filter's
/// frequency response is spread across the whole spectrum instead of being
/// dominated by the largest-magnitude eigenvalues (raw Vandermonde columns
/// are badly scale-imbalanced).  Falls back to plain Gaussian raw taps when
/// the transform is singular or complex.
inline RVec sample_raw_taps(const SpectralBasis& b, std::mt19937_64& rng) {
  const RVec c = nonzero_gaussian(b.l, rng);
  if (b.tap_transform_invertible && max_imag(b.tap_transform) <= 1e-12) {
    const RMat t = b.tap_transform.real();
    const RVec h = t.triangularView<Eigen::Upper>().solve(c);
    if (h.allFinite() && h.norm() > 0.0) return h;
  }
  return c;
}

}  // namespace detail

/// Draws R sparse signals and tap vectors.  Mode `none`: uniform supports,
/// unit-norm Gaussian entries.  Mode `prop1`: disjoint supports, orthonormal
/// taps, signals scaled to a common l1 norm and then separated so the
/// products ||x_i|| * ||h_i|| differ pairwise by at least 5% (the
/// distinct-singular-value hypothesis of the SVD separation step).
inline GroundTruth plant_ground_truth(const BasisList& bases,
                                      const std::vector<Index>& ss,
                                      std::uint64_t seed,
                                      Orthogonality mode = Orthogonality::none) {
  const Index r = static_cast<Index>(bases.size());
  if (r < 1) throw parameter_error("plant_ground_truth: need at least 1 basis");
  if (static_cast<Index>(ss.size()) != r)
    throw parameter_error("plant_ground_truth: |S| list must match basis count");
  const Index n = bases.front()->n;
  Index l_min = bases.front()->l;
  Index s_total = 0;
  for (Index i = 0; i < r; ++i) {
    const auto& b = *bases[static_cast<std::size_t>(i)];
    if (b.n != n)
      throw parameter_error("plant_ground_truth: bases disagree on N");
    l_min = std::min(l_min, b.l);
    const Index si = ss[static_cast<std::size_t>(i)];
    if (si < 1 || si > n)
      throw parameter_error("plant_ground_truth: need 1 <= S_i <= N");
    s_total += si;
  }
  if (mode == Orthogonality::prop1) {
    if (s_total > n)
      throw parameter_error(
          "plant_ground_truth: prop1 needs disjoint supports (sum S_i <= N)");
    if (r > l_min)
      throw parameter_error(
          "plant_ground_truth: prop1 needs R <= L for orthogonal taps");
  }

  auto rng = make_rng(derive_seed(seed, 0x706c616eULL));
  GroundTruth gt;
  gt.xs.resize(static_cast<std::size_t>(r));
  gt.hs.resize(static_cast<std::size_t>(r));
  gt.supports.resize(static_cast<std::size_t>(r));

  if (mode == Orthogonality::none) {
    for (Index i = 0; i < r; ++i) {
      const Index si = ss[static_cast<std::size_t>(i)];
      auto& supp = gt.supports[static_cast<std::size_t>(i)];
      supp = sample_without_replacement(n, si, rng);
      RVec vals = detail::nonzero_gaussian(si, rng);
      vals.normalize();
      RVec x = RVec::Zero(n);
      for (Index k = 0; k < si; ++k) x(supp[static_cast<std::size_t>(k)]) = vals(k);
      gt.xs[static_cast<std::size_t>(i)] = x;
      RVec h =
          detail::sample_raw_taps(*bases[static_cast<std::size_t>(i)], rng);
      h.normalize();
      gt.hs[static_cast<std::size_t>(i)] = h;
    }
    return gt;
  }

  // prop1: disjoint supports from one permutation.
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Index used = 0;
  for (Index i = 0; i < r; ++i) {
    const Index si = ss[static_cast<std::size_t>(i)];
    auto& supp = gt.supports[static_cast<std::size_t>(i)];
    supp.assign(perm.begin() + used, perm.begin() + used + si);
    std::sort(supp.begin(), supp.end());
    used += si;
    RVec vals = detail::nonzero_gaussian(si, rng);
    RVec x = RVec::Zero(n);
    for (Index k = 0; k < si; ++k) x(supp[static_cast<std::size_t>(k)]) = vals(k);
    x /= x.template lpNorm<1>();  // common l1 norm across sources
    gt.xs[static_cast<std::size_t>(i)] = x;
  }

  // Orthonormal taps by modified Gram-Schmidt (redraw on degeneracy).
  for (Index i = 0; i < r; ++i) {
    const Index li = bases[static_cast<std::size_t>(i)]->l;
    for (;;) {
      RVec h = detail::sample_raw_taps(*bases[static_cast<std::size_t>(i)], rng);
      for (Index k = 0; k < i; ++k) {
        const RVec& prev = gt.hs[static_cast<std::size_t>(k)];
        if (prev.size() == li) h -= prev.dot(h) * prev;
      }
      if (h.norm() > 1e-8) {
        gt.hs[static_cast<std::size_t>(i)] = h.normalized();
        break;
      }
    }
  }

  // Separate the products ||x_i||*||h_i|| (= ||x_i|| here) by >= 5%.
  std::vector<Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return gt.xs[static_cast<std::size_t>(a)].norm() >
           gt.xs[static_cast<std::size_t>(b)].norm();
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double prev = gt.xs[static_cast<std::size_t>(order[k - 1])].norm();
    RVec& x = gt.xs[static_cast<std::size_t>(order[k])];
    if (x.norm() > 0.95 * prev) x *= 0.95 * prev / x.norm();
  }
  return gt;
}

namespace detail {

/// Effective signal-GFT rows for source i (resampled under AS2).
inline CMat effective_u(const DemixProblem& p, Index i) {
  const auto& b = *p.bases[static_cast<std::size_t>(i)];
  if (!p.as2_mode) return b.u;
  const auto& rows = p.as2_rows[static_cast<std::size_t>(i)];
  CMat ut(b.n, b.n);
  for (Index k = 0; k < b.n; ++k)
    ut.row(k) = b.u.row(rows[static_cast<std::size_t>(k)]);
  return ut;
}

}  // namespace detail

/// Forms the observed mixture for a planted truth: filter each x_i through
/// its basis (frequency-domain observation under AS2), sum, mask rows, then
/// add white Gaussian noise (real when the clean mixture is real).
inline DemixProblem synthesize_mixture(
    const BasisList& bases, const GroundTruth& gt, double noise_sigma = 0.0,
    std::optional<std::vector<Index>> mask = std::nullopt,
    bool as2_mode = false, std::uint64_t seed = 0) {
  const Index r = static_cast<Index>(bases.size());
  if (gt.r() != r)
    throw parameter_error("synthesize_mixture: truth/basis count mismatch");
  if (r < 1) throw parameter_error("synthesize_mixture: need R >= 1");
  if (noise_sigma < 0)
    throw parameter_error("synthesize_mixture: noise_sigma must be >= 0");
  const Index n = bases.front()->n;

  DemixProblem p;
  p.bases = bases;
  p.noise_sigma = noise_sigma;
  p.as2_mode = as2_mode;
  p.seed = seed;

  if (as2_mode) {
    p.as2_rows.resize(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) {
      auto rng = make_rng(derive_seed(seed, 0x100 + static_cast<std::uint64_t>(i)));
      std::uniform_int_distribution<Index> pick(0, n - 1);
      auto& rows = p.as2_rows[static_cast<std::size_t>(i)];
      rows.resize(static_cast<std::size_t>(n));
      for (Index k = 0; k < n; ++k) rows[static_cast<std::size_t>(k)] = pick(rng);
    }
  }

  CVec y = CVec::Zero(n);
  for (Index i = 0; i < r; ++i) {
    const auto& b = *bases[static_cast<std::size_t>(i)];
    if (b.n != n)
      throw parameter_error("synthesize_mixture: bases disagree on N");
    const CVec x = to_complex(gt.xs[static_cast<std::size_t>(i)]);
    const CVec h = to_complex(gt.hs[static_cast<std::size_t>(i)]);
    if (x.size() != n || h.size() != b.l)
      throw parameter_error("synthesize_mixture: truth dimensions mismatch");
    const CVec response = filter_response(b, h);  // psi_raw h
    if (as2_mode) {
      y += response.cwiseProduct(detail::effective_u(p, i) * x);
    } else {
      y += igft_signal(b, response.cwiseProduct(gft_signal(b, x)));
    }
  }

  if (mask) {
    std::vector<Index> idx = *mask;
    std::vector<Index> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw parameter_error("synthesize_mixture: mask indices must be unique");
    for (const Index m : idx)
      if (m < 0 || m >= n)
        throw parameter_error("synthesize_mixture: mask index out of range");
    CVec ym(static_cast<Index>(idx.size()));
    for (Index k = 0; k < ym.size(); ++k)
      ym(k) = y(idx[static_cast<std::size_t>(k)]);
    y = ym;
    p.mask = std::move(idx);
  }

  if (noise_sigma > 0.0) {
    auto rng = make_rng(derive_seed(seed, 0xAD));
    const double scale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    const bool real_clean =
        y.size() == 0 || max_imag(y) <= 1e-12 * std::max(1.0, scale);
    if (real_clean) {
      y += noise_sigma * to_complex(gaussian_vector(y.size(), rng));
    } else {
      y += noise_sigma * complex_gaussian_vector(y.size(), rng);
    }
  }
  p.y = std::move(y);
  return p;
}

/// DE = (1/R) sum_i ||x^_i h^_i^T - x_i h_i^T||_F over raw-tap outer
/// products; invariant to the (c, 1/c) bilinear scaling ambiguity.
inline double demixing_error(const std::vector<CVec>& xs_hat,
                             const std::vector<CVec>& hs_hat,
                             const GroundTruth& gt) {
  const Index r = gt.r();
  if (static_cast<Index>(xs_hat.size()) != r ||
      static_cast<Index>(hs_hat.size()) != r)
    throw parameter_error("demixing_error: estimate count mismatch");
  double acc = 0.0;
  for (Index i = 0; i < r; ++i) {
    const CVec& xh = xs_hat[static_cast<std::size_t>(i)];
    const CVec& hh = hs_hat[static_cast<std::size_t>(i)];
    const RVec& x = gt.xs[static_cast<std::size_t>(i)];
    const RVec& h = gt.hs[static_cast<std::size_t>(i)];
    if (xh.size() != x.size() || hh.size() != h.size())
      throw parameter_error("demixing_error: estimate dimensions mismatch");
    const CMat diff = xh * hh.transpose() -
                      to_complex(x) * to_complex(h).transpose();
    acc += diff.norm();
  }
  return acc / static_cast<double>(r);
}

/// Best-permutation variant for pipelines whose component order is not tied
/// to the planted order (SVD separation).  Exhaustive, r <= 5.
inline double demixing_error_best_perm(const std::vector<CVec>& xs_hat,
                                       const std::vector<CVec>& hs_hat,
                                       const GroundTruth& gt) {
  const Index r = gt.r();
  if (r > 5)
    throw parameter_error("demixing_error_best_perm: exhaustive matching capped at R <= 5");
  std::vector<std::size_t> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<CVec> xs(static_cast<std::size_t>(r)), hs(static_cast<std::size_t>(r));
    for (std::size_t i = 0; i < perm.size(); ++i) {
      xs[i] = xs_hat[perm[i]];
      hs[i] = hs_hat[perm[i]];
    }
    best = std::min(best, demixing_error(xs, hs, gt));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Recovery counts as successful strictly below the threshold.
inline bool success(double de, double threshold = 1e-3) {
  if (de < 0)
    throw parameter_error("success: DE must be nonnegative");
  return de < threshold;
}

}  // namespace graphdemix
