#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/model.hpp"

namespace graphdemix {

namespace detail {

inline void require_distinct(const SpectralBasis& b, const char* op) {
  if (!b.distinct_eigvals)
    throw model_error(std::string(op) +
                      ": basis has repeated eigenvalues; concentration "
                      "quantities are undefined");
}

/// Sum of the k largest squared magnitudes in one row, accumulated in
/// ascending column order so the value matches a subset-enumeration oracle
/// bit for bit.
inline double row_k_largest_sq_sum(const CMat& a, Index row, Index k) {
  std::vector<std::pair<double, Index>> mags;
  mags.reserve(static_cast<std::size_t>(a.cols()));
  for (Index j = 0; j < a.cols(); ++j)
    mags.emplace_back(std::norm(a(row, j)), j);
  std::sort(mags.begin(), mags.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(k));
  for (Index t = 0; t < k; ++t) idx.push_back(mags[static_cast<std::size_t>(t)].second);
  std::sort(idx.begin(), idx.end());
  double acc = 0.0;
  for (const Index j : idx) acc += std::norm(a(row, j));
  return acc;
}

}  // namespace detail

/// Worst-case squared row norm over k-entry index subsets:
/// max over rows of the sum of the k largest squared entries (the subset
/// maximization is separable per row).
inline double rho(const CMat& a, Index k) {
  if (k < 1 || k > a.cols())
    throw parameter_error("rho: need 1 <= k <= column count");
  if (a.rows() < 1) throw parameter_error("rho: empty matrix");
  double best = 0.0;
  for (Index row = 0; row < a.rows(); ++row)
    best = std::max(best, detail::row_k_largest_sq_sum(a, row, k));
  return best;
}

inline double rho(const RMat& a, Index k) { return rho(to_complex(a), k); }

/// Worst-case row-coupled product max over rows l of
/// ||a_{l,O1}|| * ||b_{l,O2}|| with |O1| = k1, |O2| = k2; the spectral norm of
/// the rank-1 outer product equals the product of the two row norms, and both
/// subset maxima are attained independently for a fixed row.
inline double kappa(const CMat& a, const CMat& b, Index k1, Index k2) {
  if (a.rows() != b.rows())
    throw parameter_error("kappa: matrices must share the row count");
  if (k1 < 1 || k1 > a.cols() || k2 < 1 || k2 > b.cols())
    throw parameter_error("kappa: subset sizes out of range");
  double best = 0.0;
  for (Index row = 0; row < a.rows(); ++row) {
    const double na = std::sqrt(detail::row_k_largest_sq_sum(a, row, k1));
    const double nb = std::sqrt(detail::row_k_largest_sq_sum(b, row, k2));
    best = std::max(best, na * nb);
  }
  return best;
}

inline double kappa(const RMat& a, const RMat& b, Index k1, Index k2) {
  return kappa(to_complex(a), to_complex(b), k1, k2);
}

/// mu_max^2 = max over sources i and rows n of (N/L_i) ||psi_{i,n}||^2,
/// on the orthonormalized psi (returns mu_max, not its square).
inline double mu_max(const BasisList& bases) {
  if (bases.empty()) throw parameter_error("mu_max: no bases");
  double best = 0.0;
  for (const auto& bp : bases) {
    const auto& b = *bp;
    detail::require_distinct(b, "mu_max");
    for (Index n = 0; n < b.n; ++n)
      best = std::max(best, static_cast<double>(b.n) /
                                static_cast<double>(b.l) *
                                b.psi.row(n).squaredNorm());
  }
  return std::sqrt(best);
}

/// Tap/frequency coupling under the trivial partition:
/// mu_h^2 = N max over i, n of |psi_{i,n}^H h'_i|^2 / ||h'_i||^2 with taps
/// expressed in the orthonormal-psi convention (raw taps are converted).
inline double mu_h(const BasisList& bases, const std::vector<RVec>& hs) {
  if (bases.empty() || bases.size() != hs.size())
    throw parameter_error("mu_h: need one tap vector per basis");
  double best = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto& b = *bases[i];
    detail::require_distinct(b, "mu_h");
    if (hs[i].size() != b.l)
      throw parameter_error("mu_h: tap length mismatch");
    if (hs[i].norm() == 0.0)
      throw degenerate_error("mu_h: zero tap vector");
    const CVec hp = b.to_orthonormal_taps(to_complex(hs[i]));
    const double denom = hp.squaredNorm();
    for (Index n = 0; n < b.n; ++n) {
      const Complex ip = b.psi.row(n).dot(hp);  // psi_n^H h'
      best = std::max(best,
                      static_cast<double>(b.n) * std::norm(ip) / denom);
    }
  }
  return std::sqrt(best);
}

struct ConcentrationParams {
  std::vector<double> rho_u;    ///< per source, subset size S_i
  std::vector<double> rho_psi;  ///< per source, subset size L_i
  RMat kappa_u;                 ///< pairwise, subset sizes (S_k, S_j)
  RMat kappa_psi;               ///< pairwise, subset sizes (L_k, L_j)
  double mu_h = 0.0;
  double mu_max = 0.0;
};

/// All concentration quantities of an instance in one sweep.
inline ConcentrationParams concentration_params(const BasisList& bases,
                                                const std::vector<RVec>& hs,
                                                const std::vector<Index>& ss) {
  const std::size_t r = bases.size();
  if (r == 0 || hs.size() != r || ss.size() != r)
    throw parameter_error("concentration_params: list length mismatch");
  ConcentrationParams cp;
  cp.rho_u.resize(r);
  cp.rho_psi.resize(r);
  cp.kappa_u.resize(static_cast<Index>(r), static_cast<Index>(r));
  cp.kappa_psi.resize(static_cast<Index>(r), static_cast<Index>(r));
  for (std::size_t i = 0; i < r; ++i) {
    const auto& b = *bases[i];
    detail::require_distinct(b, "concentration_params");
    cp.rho_u[i] = rho(b.u, ss[i]);
    cp.rho_psi[i] = rho(b.psi, b.l);
  }
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < r; ++j) {
      cp.kappa_u(static_cast<Index>(k), static_cast<Index>(j)) =
          kappa(bases[k]->u, bases[j]->u, ss[k], ss[j]);
      cp.kappa_psi(static_cast<Index>(k), static_cast<Index>(j)) =
          kappa(bases[k]->psi, bases[j]->psi, bases[k]->l, bases[j]->l);
    }
  cp.mu_h = mu_h(bases, hs);
  cp.mu_max = mu_max(bases);
  return cp;
}

struct RecoveryBounds {
  double alpha1 = 0.0;
  double alpha2 = 0.0;  ///< +inf when R = 1 (empty pair minimum)
  double alpha3 = 0.0;
  double alpha = 0.0;   ///< min of the three
  std::optional<double> probability;  ///< 1 - N^{1-alpha}, only when alpha >= 1
  bool vacuous = true;
  double constant_c = 1.0;
};

/// Evaluates the three exponents of the recovery guarantee literally
/// (natural logarithms; the unspecified numerical constant in alpha3 is a
/// caller parameter):
///   alpha1 = min_i (3/128) / (rho_psi_i rho_u_i ln(2 N L_i S_i))
///   alpha2 = min_{j!=k} (9/32) / (rho_psi_k rho_psi_j max(rho_u_k, rho_u_j)
///            + kappa_u kappa_psi / R) / (R^2 ln(2N))
///   alpha3 = min_i 1 / (C N R max(mu_max^2 L_i, mu_h^2 N) ln^2 N) - ln R
inline RecoveryBounds alpha_bounds(const ConcentrationParams& params, Index n,
                                   Index r, const std::vector<Index>& ls,
                                   const std::vector<Index>& ss,
                                   double constant_c = 1.0) {
  if (r < 1 || static_cast<Index>(ls.size()) != r ||
      static_cast<Index>(ss.size()) != r)
    throw parameter_error("alpha_bounds: list length mismatch");
  if (static_cast<Index>(params.rho_u.size()) != r ||
      static_cast<Index>(params.rho_psi.size()) != r)
    throw parameter_error("alpha_bounds: params computed for different R");
  if (n < 2)
    throw parameter_error("alpha_bounds: need N >= 2 (log terms vanish)");
  if (!(constant_c > 0))
    throw parameter_error("alpha_bounds: constant must be > 0");

  const double nd = static_cast<double>(n);
  double a1 = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < r; ++i) {
    const double li = static_cast<double>(ls[static_cast<std::size_t>(i)]);
    const double si = static_cast<double>(ss[static_cast<std::size_t>(i)]);
    const double denom = params.rho_psi[static_cast<std::size_t>(i)] *
                         params.rho_u[static_cast<std::size_t>(i)] *
                         std::log(2.0 * nd * li * si);
    a1 = std::min(a1, (3.0 / 128.0) / denom);
  }

  double a2 = std::numeric_limits<double>::infinity();
  const double rd = static_cast<double>(r);
  for (Index k = 0; k < r; ++k)
    for (Index j = 0; j < r; ++j) {
      if (j == k) continue;
      const double term =
          params.rho_psi[static_cast<std::size_t>(k)] *
              params.rho_psi[static_cast<std::size_t>(j)] *
              std::max(params.rho_u[static_cast<std::size_t>(k)],
                       params.rho_u[static_cast<std::size_t>(j)]) +
          params.kappa_u(k, j) * params.kappa_psi(k, j) / rd;
      a2 = std::min(a2, (9.0 / 32.0) / term / (rd * rd * std::log(2.0 * nd)));
    }

  double a3 = std::numeric_limits<double>::infinity();
  const double log_n = std::log(nd);
  for (Index i = 0; i < r; ++i) {
    const double li = static_cast<double>(ls[static_cast<std::size_t>(i)]);
    const double denom = constant_c * nd * rd *
                         std::max(params.mu_max * params.mu_max * li,
                                  params.mu_h * params.mu_h * nd) *
                         log_n * log_n;
    a3 = std::min(a3, 1.0 / denom);
  }
  a3 -= std::log(rd);

  RecoveryBounds rb;
  rb.alpha1 = a1;
  rb.alpha2 = a2;
  rb.alpha3 = a3;
  rb.alpha = std::min(a1, std::min(a2, a3));
  rb.constant_c = constant_c;
  rb.vacuous = !(rb.alpha >= 1.0);
  if (!rb.vacuous)
    rb.probability = 1.0 - std::pow(nd, 1.0 - rb.alpha);
  return rb;
}

/// The four-way concentration product ranking demixing difficulty of a graph
/// pair (larger = harder).
inline double predictor_rho_bar(const SpectralBasis& basis_k,
                                const SpectralBasis& basis_j, Index s_k,
                                Index s_j, Index l_k, Index l_j) {
  detail::require_distinct(basis_k, "predictor_rho_bar");
  detail::require_distinct(basis_j, "predictor_rho_bar");
  return rho(basis_k.u, s_k) * rho(basis_j.u, s_j) * rho(basis_k.psi, l_k) *
         rho(basis_j.psi, l_j);
}

inline double spectral_norm(const CMat& m) {
  return m.size() == 0 ? 0.0 : Eigen::JacobiSVD<CMat>(m).singularValues()(0);
}

struct Lemma1Report {
  /// Per source: || A_i^H A_i - I || restricted to the planted support, and
  /// whether it passes the <= 1/4 test.
  std::vector<std::pair<double, bool>> local_isometry;
  /// max_{j != k} || A_j^H A_k || over restricted operators, <= 1/(4R) test.
  std::pair<double, bool> cross_coherence;
  /// Per source: (full operator norm, theory envelope
  /// sqrt(2N(ln(2 L_i N)+1)+1)).
  std::vector<std::pair<double, double>> operator_norms;
};

namespace detail {

/// Support-restricted frequency-domain operator: column (s, c) holds
/// { u_eff(n, support[s]) * psi(n, c) }_n.
inline CMat restricted_operator(const CMat& u_eff, const CMat& psi,
                                const std::vector<Index>& support) {
  const Index n = u_eff.rows();
  const Index l = psi.cols();
  const Index s = static_cast<Index>(support.size());
  CMat a(n, s * l);
  for (Index c = 0; c < l; ++c)
    for (Index k = 0; k < s; ++k)
      a.col(c * s + k) =
          u_eff.col(support[static_cast<std::size_t>(k)]).cwiseProduct(psi.col(c));
  return a;
}

}  // namespace detail

/// Runnable isometry/coherence diagnostics on a planted instance's supports.
/// Operators live in the frequency domain (AS2-resampled U rows when the
/// problem was built that way).
inline Lemma1Report check_lemma1_conditions(
    const DemixProblem& p, const std::vector<std::vector<Index>>& supports) {
  const Index r = p.r();
  if (static_cast<Index>(supports.size()) != r)
    throw parameter_error("check_lemma1_conditions: one support per source");
  const Index n = p.n();
  std::vector<CMat> restricted(static_cast<std::size_t>(r));
  Lemma1Report rep;
  for (Index i = 0; i < r; ++i) {
    const auto& b = *p.bases[static_cast<std::size_t>(i)];
    detail::require_distinct(b, "check_lemma1_conditions");
    const auto& supp = supports[static_cast<std::size_t>(i)];
    if (supp.empty())
      throw parameter_error("check_lemma1_conditions: empty support");
    for (const Index s : supp)
      if (s < 0 || s >= n)
        throw parameter_error("check_lemma1_conditions: support out of range");
    const CMat u_eff = detail::effective_u(p, i);
    const CMat a = detail::restricted_operator(u_eff, b.psi, supp);
    restricted[static_cast<std::size_t>(i)] = a;
    const CMat gram = a.adjoint() * a;
    const double iso =
        spectral_norm(gram - CMat::Identity(gram.rows(), gram.cols()));
    rep.local_isometry.emplace_back(iso, iso <= 0.25);

    std::vector<Index> full(static_cast<std::size_t>(n));
    std::iota(full.begin(), full.end(), Index{0});
    const CMat a_full = detail::restricted_operator(u_eff, b.psi, full);
    const double gamma = std::sqrt(
        2.0 * static_cast<double>(n) *
            (std::log(2.0 * static_cast<double>(b.l) * static_cast<double>(n)) +
             1.0) +
        1.0);
    rep.operator_norms.emplace_back(spectral_norm(a_full), gamma);
  }
  double mu = 0.0;
  for (Index j = 0; j < r; ++j)
    for (Index k = 0; k < r; ++k) {
      if (j == k) continue;
      mu = std::max(mu, spectral_norm(restricted[static_cast<std::size_t>(j)].adjoint() *
                                      restricted[static_cast<std::size_t>(k)]));
    }
  rep.cross_coherence = {mu, mu <= 1.0 / (4.0 * static_cast<double>(r))};
  return rep;
}

}  // namespace graphdemix
