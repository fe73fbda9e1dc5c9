#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/model.hpp"

namespace graphdemix {

/// Leading singular triple of the lifted variable: x^ = sqrt(s1) u1,
/// h'^ = sqrt(s1) conj(v1), returned with raw taps h^ = tap_transform^{-1} h'^.
/// Phase fixed so the largest-magnitude entry of x^ is real positive.
inline std::pair<CVec, CVec> extract_rank1(const CMat& z,
                                           const SpectralBasis& basis) {
  if (z.rows() != basis.n || z.cols() != basis.l)
    throw parameter_error("extract_rank1: matrix shape mismatch with basis");
  if (z.norm() == 0.0)
    throw degenerate_error("extract_rank1: zero matrix has no factors");
  Eigen::JacobiSVD<CMat> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s1 = svd.singularValues()(0);
  CVec x = std::sqrt(s1) * svd.matrixU().col(0);
  CVec hp = std::sqrt(s1) * svd.matrixV().col(0).conjugate();
  Index imax = 0;
  double best = 0.0;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x(i)) > best) {
      best = std::abs(x(i));
      imax = i;
    }
  const Complex c = x(imax) / std::abs(x(imax));
  x *= std::conj(c);
  hp *= c;  // keeps the outer product x h'^T unchanged
  return {x, basis.to_raw_taps(hp)};
}

/// Result of a support-restricted exact fit.  `certified` means the restricted
/// linear system reproduces the mixture to machine precision AND every
/// source's restricted block is numerically rank one -- together these
/// identify the planted solution except on measure-zero instances.
struct SupportFit {
  bool certified = false;
  double residual = 1e18;    ///< ||y - M z|| / ||y|| on the restricted fit
  double rank_ratio = 1e18;  ///< worst per-source sigma_2 / sigma_1
  Index total_support = 0;
  std::vector<CMat> zs;  ///< full-size lifted matrices, zero off support
  std::vector<CVec> xs;  ///< rank-1 factors (empty unless certified)
  std::vector<CVec> hs;  ///< raw-tap factors (empty unless certified)
};

namespace detail {

constexpr double kRefineResidTol = 1e-8;
constexpr double kRefineRankTol = 1e-4;

/// A feasible set {z + t nv} with one complex degree of freedom arises when
/// supports collide across sources (the tap-0 columns are both e_node).  The
/// rank-one member is found by the roots of the 2x2-minor quadratics and
/// scored by the summed rank ratios.
inline void rank1_null_correct(CVec& sol, const CVec& nv,
                               const std::vector<int>& offs,
                               const std::vector<int>& ks, Index l) {
  const int r = static_cast<int>(ks.size());
  auto block = [&](const CVec& v, int s) {
    CMat z(ks[static_cast<std::size_t>(s)], l);
    for (Index j = 0; j < l; ++j)
      for (int a = 0; a < ks[static_cast<std::size_t>(s)]; ++a)
        z(a, j) = v(offs[static_cast<std::size_t>(s)] +
                    j * ks[static_cast<std::size_t>(s)] + a);
    return z;
  };
  auto score = [&](Complex t) {
    double sc = 0.0;
    for (int q = 0; q < r; ++q) {
      const CMat zq = block(sol, q) + t * block(nv, q);
      Eigen::JacobiSVD<CMat> svd(zq);
      const auto& sv = svd.singularValues();
      if (sv.size() > 1 && sv(0) > 0) sc += sv(1) / sv(0);
    }
    return sc;
  };
  Complex tbest(0.0, 0.0);
  double cbest = score(tbest);
  for (int s = 0; s < r; ++s) {
    const int k = ks[static_cast<std::size_t>(s)];
    if (k < 2 || l < 2) continue;
    const CMat z0 = block(sol, s), nn = block(nv, s);
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b)
        for (Index c = 0; c < l; ++c)
          for (Index d = c + 1; d < l; ++d) {
            const Complex qa = nn(a, c) * nn(b, d) - nn(a, d) * nn(b, c);
            const Complex qb = z0(a, c) * nn(b, d) + nn(a, c) * z0(b, d) -
                               z0(a, d) * nn(b, c) - nn(a, d) * z0(b, c);
            const Complex qc = z0(a, c) * z0(b, d) - z0(a, d) * z0(b, c);
            if (std::abs(qa) < 1e-12 && std::abs(qb) < 1e-12) continue;
            std::vector<Complex> roots;
            if (std::abs(qa) < 1e-12) {
              roots.push_back(-qc / qb);
            } else {
              const Complex disc = std::sqrt(qb * qb - 4.0 * qa * qc);
              roots.push_back((-qb + disc) / (2.0 * qa));
              roots.push_back((-qb - disc) / (2.0 * qa));
            }
            for (const Complex t : roots) {
              const double sc = score(t);
              if (sc < cbest) {
                cbest = sc;
                tbest = t;
              }
            }
          }
  }
  sol += tbest * nv;
}

/// Exact fit of the mixture on fixed per-source supports.  `ms[i]` is
/// transfer_matrix(*bases[i]); supports hold vertex indices.
inline SupportFit restricted_fit(const BasisList& bases,
                                 const std::vector<CMat>& ms, const CVec& y,
                                 const std::vector<std::vector<int>>& supports,
                                 bool extract) {
  const Index n = bases.front()->n, l = bases.front()->l;
  const int r = static_cast<int>(bases.size());
  SupportFit out;
  std::vector<int> ks, offs;
  int ncols = 0;
  for (int s = 0; s < r; ++s) {
    ks.push_back(static_cast<int>(supports[static_cast<std::size_t>(s)].size()));
    offs.push_back(ncols);
    ncols += ks.back() * static_cast<int>(l);
    out.total_support += ks.back();
  }
  if (ncols == 0 || ncols > static_cast<int>(y.size()))
    return out;  // empty or underdetermined restriction: nothing to certify
  CMat big(n, ncols);
  int c0 = 0;
  for (int s = 0; s < r; ++s)
    for (Index j = 0; j < l; ++j)
      for (const int node : supports[static_cast<std::size_t>(s)])
        big.col(c0++) = ms[static_cast<std::size_t>(s)].col(j * n + node);
  Eigen::ColPivHouseholderQR<CMat> qr(big);
  qr.setThreshold(1e-9);
  CVec sol = qr.solve(y);
  const double ynorm = y.norm();
  out.residual = (big * sol - y).norm() / std::max(ynorm, 1e-300);
  if (out.residual > kRefineResidTol || sol.norm() > 1e3 * ynorm) return out;
  if (qr.rank() < ncols) {
    Eigen::JacobiSVD<CMat> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int nulldim = 0;
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) < 1e-10 * sv(0)) ++nulldim;
    // One-dimensional ambiguities are repaired; wider null spaces are rare
    // (multiple support collisions) and left to the iterative path.
    if (nulldim != 1) return out;
    const CVec nv = svd.matrixV().col(sv.size() - 1);
    rank1_null_correct(sol, nv, offs, ks, l);
  }
  out.rank_ratio = 0.0;
  std::vector<CMat> zfulls(static_cast<std::size_t>(r));
  for (int s = 0; s < r; ++s) {
    const int k = ks[static_cast<std::size_t>(s)];
    CMat zr(k, l);
    for (Index j = 0; j < l; ++j)
      for (int a = 0; a < k; ++a)
        zr(a, j) = sol(offs[static_cast<std::size_t>(s)] + j * k + a);
    if (zr.norm() < 1e-10 * ynorm) return out;  // vanished source
    Eigen::JacobiSVD<CMat> svd(zr);
    const auto& sv = svd.singularValues();
    if (sv.size() > 1 && sv(0) > 0)
      out.rank_ratio = std::max(out.rank_ratio, sv(1) / sv(0));
    CMat zfull = CMat::Zero(n, l);
    for (int a = 0; a < k; ++a)
      zfull.row(supports[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) =
          zr.row(a);
    zfulls[static_cast<std::size_t>(s)] = std::move(zfull);
  }
  out.certified = out.rank_ratio < kRefineRankTol;
  out.zs = std::move(zfulls);
  if (out.certified && extract) {
    out.xs.resize(static_cast<std::size_t>(r));
    out.hs.resize(static_cast<std::size_t>(r));
    for (int s = 0; s < r; ++s) {
      auto [x, h] = extract_rank1(out.zs[static_cast<std::size_t>(s)],
                                  *bases[static_cast<std::size_t>(s)]);
      out.xs[static_cast<std::size_t>(s)] = std::move(x);
      out.hs[static_cast<std::size_t>(s)] = std::move(h);
    }
  }
  return out;
}

/// Vertex indices of z's rows sorted by decreasing row norm.
inline std::vector<int> row_rank_order(const CMat& z) {
  RVec rn = z.rowwise().norm();
  std::vector<int> ord(static_cast<std::size_t>(z.rows()));
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return rn(a) > rn(b); });
  return ord;
}

/// Interleave several rank orders (best ranks first), dedupe, cap at m.
inline std::vector<int> pool_union(
    const std::vector<std::vector<int>>& orders, int m) {
  std::vector<int> out;
  std::set<int> seen;
  std::size_t depth = 0;
  for (const auto& o : orders) depth = std::max(depth, o.size());
  for (std::size_t rank = 0; rank < depth; ++rank)
    for (const auto& o : orders) {
      if (rank < o.size() && seen.insert(o[rank]).second)
        out.push_back(o[rank]);
      if (static_cast<int>(out.size()) >= m) return out;
    }
  return out;
}

/// All pool subsets of each size 1..kmax, per source.
inline std::vector<std::vector<std::vector<int>>> subsets_by_size(
    const std::vector<int>& pool, int kmax) {
  const int m = static_cast<int>(pool.size());
  std::vector<std::vector<std::vector<int>>> by_size(
      static_cast<std::size_t>(kmax) + 1);
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    const int pc = __builtin_popcount(mask);
    if (pc > kmax) continue;
    std::vector<int> ss;
    for (int b = 0; b < m; ++b)
      if (mask & (1u << b)) ss.push_back(pool[static_cast<std::size_t>(b)]);
    by_size[static_cast<std::size_t>(pc)].push_back(std::move(ss));
  }
  return by_size;
}

/// Search supports drawn from per-source pools, smallest total size first;
/// stops after the first size level that certifies (parsimony also protects
/// against degenerate oversized restrictions).  `budget` caps the number of
/// restricted fits, keeping the search deterministic and bounded.
inline SupportFit enumerate_supports(const BasisList& bases,
                                     const std::vector<CMat>& ms,
                                     const CVec& y,
                                     const std::vector<std::vector<int>>& pools,
                                     int kmax, std::uint64_t* budget) {
  const int r = static_cast<int>(pools.size());
  std::vector<std::vector<std::vector<std::vector<int>>>> subs;
  subs.reserve(static_cast<std::size_t>(r));
  for (const auto& pool : pools) subs.push_back(subsets_by_size(pool, kmax));
  SupportFit best;
  std::vector<std::vector<int>> supp(static_cast<std::size_t>(r));
  // walk compositions (k_1..k_r) of ktot with parts in 1..kmax
  std::vector<int> parts(static_cast<std::size_t>(r));
  for (int ktot = r; ktot <= r * kmax; ++ktot) {
    std::function<void(int, int)> walk = [&](int s, int left) {
      if (*budget == 0) return;
      if (s == r) return;  // handled below
      const int smax = std::min(kmax, left - (r - 1 - s));
      for (int k = 1; k <= smax; ++k) {
        parts[static_cast<std::size_t>(s)] = k;
        if (s + 1 == r) {
          if (left - k != 0) continue;
          // evaluate all products for this composition
          std::function<void(int)> prod = [&](int q) {
            if (*budget == 0) return;
            if (q == r) {
              --*budget;
              SupportFit f = restricted_fit(bases, ms, y, supp, true);
              if (f.certified &&
                  (!best.certified || f.residual < best.residual))
                best = std::move(f);
              return;
            }
            for (const auto& ss :
                 subs[static_cast<std::size_t>(q)]
                     [static_cast<std::size_t>(parts[static_cast<std::size_t>(q)])]) {
              supp[static_cast<std::size_t>(q)] = ss;
              prod(q + 1);
              if (*budget == 0) return;
            }
          };
          prod(0);
        } else {
          walk(s + 1, left - k);
        }
        if (*budget == 0) return;
      }
    };
    walk(0, ktot);
    if (best.certified || *budget == 0) break;
  }
  return best;
}

/// Last-resort widening: one source takes {two pool rows + one free vertex},
/// every other source enumerates its pool (sizes ascending, early exit).
inline SupportFit wildcard_supports(const BasisList& bases,
                                    const std::vector<CMat>& ms, const CVec& y,
                                    const std::vector<std::vector<int>>& pools,
                                    int kmax, std::uint64_t* budget) {
  const Index n = bases.front()->n;
  const int r = static_cast<int>(pools.size());
  SupportFit best;
  if (r > 2) return best;  // joint widening beyond two sources is unbounded
  for (int s = 0; s < r && !best.certified; ++s) {
    const auto& ps = pools[static_cast<std::size_t>(s)];
    if (ps.size() < 2) continue;
    std::set<int> inpool(ps.begin(), ps.end());
    const int o = r == 2 ? 1 - s : -1;
    std::vector<std::vector<std::vector<int>>> osubs;
    if (o >= 0)
      osubs = subsets_by_size(pools[static_cast<std::size_t>(o)], kmax);
    const int ko_hi = o >= 0 ? kmax : 1;
    for (int ko = 1; ko <= ko_hi && !best.certified; ++ko) {
      for (std::size_t a = 0; a < ps.size(); ++a)
        for (std::size_t b = a + 1; b < ps.size(); ++b)
          for (Index f = 0; f < n; ++f) {
            if (inpool.count(static_cast<int>(f))) continue;
            std::vector<std::vector<int>> supp(static_cast<std::size_t>(r));
            supp[static_cast<std::size_t>(s)] = {ps[a], ps[b],
                                                 static_cast<int>(f)};
            if (o >= 0) {
              for (const auto& so :
                   osubs[static_cast<std::size_t>(ko)]) {
                supp[static_cast<std::size_t>(o)] = so;
                if (*budget == 0) return best;
                --*budget;
                SupportFit fit = restricted_fit(bases, ms, y, supp, true);
                if (fit.certified &&
                    (!best.certified || fit.residual < best.residual))
                  best = std::move(fit);
              }
            } else {
              if (*budget == 0) return best;
              --*budget;
              SupportFit fit = restricted_fit(bases, ms, y, supp, true);
              if (fit.certified &&
                  (!best.certified || fit.residual < best.residual))
                best = std::move(fit);
            }
          }
    }
  }
  return best;
}

}  // namespace detail

/// Exact mixture fit on caller-chosen supports (e.g. oracle or hypothesised),
/// with the cross-source collision ambiguity repaired and a certificate that
/// the fit is feasible and rank one.  Requires a fully observed, unmasked,
/// unconstrained problem.
inline SupportFit fit_supports(const DemixProblem& p,
                               const std::vector<std::vector<Index>>& supports) {
  if (p.mask || p.as2_mode || !p.known_entries.empty())
    throw model_error(
        "fit_supports: requires a fully observed, unconstrained problem");
  if (static_cast<Index>(supports.size()) != p.r())
    throw parameter_error("fit_supports: one support per source required");
  std::vector<std::vector<int>> sv(supports.size());
  for (std::size_t i = 0; i < supports.size(); ++i) {
    std::set<Index> seen;
    for (const Index node : supports[i]) {
      if (node < 0 || node >= p.n())
        throw parameter_error("fit_supports: vertex index out of range");
      if (!seen.insert(node).second)
        throw parameter_error("fit_supports: duplicate vertex in support");
      sv[i].push_back(static_cast<int>(node));
    }
  }
  std::vector<CMat> ms;
  ms.reserve(p.bases.size());
  for (const auto& b : p.bases) ms.push_back(transfer_matrix(*b));
  return detail::restricted_fit(p.bases, ms, p.y, sv, true);
}

}  // namespace graphdemix
