#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/model.hpp"
#include "graphdemix/prox.hpp"
#include "graphdemix/random.hpp"
#include "graphdemix/refine.hpp"

namespace graphdemix {

struct SolverConfig {
  /// Per-source nuclear-norm weights; empty = all 1.
  std::vector<double> etas;
  /// Per-source row-sparsity weights; empty = all beta_default.
  std::vector<double> betas;
  double beta_default = 0.1;
  double admm_rho = 1.0;
  Index max_iter = 2000;
  double tol_abs = 1e-8;
  double tol_rel = 1e-6;
  /// Log-det reweighting smoother: delta_i = logdet_delta * sigma_1 of
  /// source i's first inner solution.
  double logdet_delta = 1e-2;
  Index logdet_outer_iters = 4;
  /// When > 0, outer iterations also reweight the row-sparsity term
  /// (log-sum surrogate) with per-row weights 1/(||row|| + eps_i),
  /// eps_i = logdet_row_delta * max row norm of source i's first solution.
  /// 0 keeps the plain l2,1 term throughout.
  double logdet_row_delta = 0.0;
  /// Geometric decay of the smoothing level across outer iterations
  /// (delta_i at outer k is delta_i * anneal^(k-1)); 1 keeps it fixed.
  /// Annealing sharpens gradually, which escapes poor early basins.
  double logdet_anneal = 1.0;
  /// When set (mu > 0), the hard data constraint is replaced by the penalty
  /// (1/2mu)||y - sum M_i vec(Z_i)||^2 (noisy observations).
  std::optional<double> noise_epsilon;
  bool record_objective_trace = false;
  /// Certified support refinement for the reweighted scheme: candidate
  /// solutions nominate small vertex pools per source; supports drawn from
  /// the pools are fitted exactly against the mixture and accepted only when
  /// the fit is feasible to machine precision with rank-one factors.  Falls
  /// back to the iterative solution when nothing certifies.  Engages only on
  /// noiseless, fully observed, unconstrained problems with at most two
  /// sources.
  bool refine = true;
  Index refine_pool = 8;        ///< candidate rows kept per source
  Index refine_kmax = 4;        ///< largest support size tried per source
  bool refine_wildcard = true;  ///< allow one out-of-pool vertex per source
  Index refine_restarts = 12;   ///< perturbed reweighting restarts
  double refine_jitter = 1.0;   ///< log-normal scale of weight perturbations
  std::uint64_t refine_budget = 6000000;  ///< cap on restricted fits
};

struct LiftedSolution {
  std::vector<CMat> zs;       ///< lifted variables, orthonormal-tap convention
  std::vector<CVec> xs_hat;   ///< extracted signals
  std::vector<CVec> hs_hat;   ///< extracted raw taps
  double objective = 0.0;     ///< sum_i eta_i ||Z_i||_* + beta_i ||Z_i||_{2,1}
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  Index iterations = 0;
  bool converged = false;
  /// ||y - sum M_i vec(Z_i)|| (plus any known-entry constraint residual).
  double feasibility = 0.0;
  bool numeric_warning = false;
  /// True when certified support refinement replaced the iterative solution
  /// with an exact restricted fit.
  bool refined = false;
  std::vector<double> objective_trace;  ///< per-iteration, behind config flag
  std::vector<double> surrogate_trace;  ///< log-det outer surrogate values
};

/// Sum-formulation result: one Z targeting sum_i Z_i.
struct SumSolution {
  CMat z;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  Index iterations = 0;
  bool converged = false;
  double feasibility = 0.0;
  bool numeric_warning = false;
  std::vector<double> objective_trace;
  std::vector<double> surrogate_trace;
};

enum class SolveMethod { convex, nuclear_only, logdet };

/// Objective of the lifted program (used directly by ambiguity checks).
inline double lifted_objective(const std::vector<CMat>& zs,
                               const std::vector<double>& etas,
                               const std::vector<double>& betas) {
  if (zs.size() != etas.size() || zs.size() != betas.size())
    throw parameter_error("lifted_objective: weight list sizes mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i)
    acc += etas[i] * nuclear_norm(zs[i]) + betas[i] * l21_norm(zs[i]);
  return acc;
}

/// Returns a copy of the problem with linear constraints induced by known
/// entries of x_i appended: rows of Z_i scale like x_i[node] * h'^T, so for
/// consecutive known nodes a, b:  value_b * Z_i[a,:] = value_a * Z_i[b,:].
inline DemixProblem add_known_entry_constraints(
    const DemixProblem& p, Index source,
    const std::vector<std::pair<Index, double>>& known) {
  if (source < 0 || source >= p.r())
    throw parameter_error("add_known_entry_constraints: source out of range");
  if (known.size() < 2)
    throw parameter_error(
        "add_known_entry_constraints: need at least 2 known entries to "
        "derive a constraint");
  std::vector<std::pair<Index, double>> sorted = known;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (sorted[k].first < 0 || sorted[k].first >= p.n())
      throw parameter_error("add_known_entry_constraints: node out of range");
    if (k && sorted[k].first == sorted[k - 1].first)
      throw parameter_error("add_known_entry_constraints: duplicate node");
  }
  DemixProblem q = p;
  q.known_entries.push_back({source, std::move(sorted)});
  return q;
}

namespace detail {

/// One source's lifted linear operator, factored as
///   z_freq[n] = u_n^T Z psi_n   (freq-domain coefficients)
///   contribution = front * z_freq
/// with front = (masked) V/N in vertex mode or (masked) I under AS2.
struct SourceOp {
  std::shared_ptr<const SpectralBasis> basis;
  CMat u_eff;  // n x n, rows resampled under AS2
  CMat psi;    // n x l, orthonormal columns
  CMat front;  // m_out x n
  Index l = 0;

  Index dim() const { return u_eff.cols() * l; }

  CVec forward(const CMat& z) const {
    return front * ((u_eff * z).cwiseProduct(psi)).rowwise().sum();
  }

  CMat adjoint(const CVec& w) const {
    const CVec s = front.adjoint() * w;
    return u_eff.adjoint() * (s.asDiagonal() * psi.conjugate());
  }

  /// M M^H = front ((psi psi^H) o (u u^H)) front^H   (o = Hadamard).
  CMat gram() const {
    const CMat p = psi * psi.adjoint();
    const CMat q = u_eff * u_eff.adjoint();
    return front * p.cwiseProduct(q) * front.adjoint();
  }
};

inline std::vector<SourceOp> build_ops(const DemixProblem& p) {
  const Index n = p.n();
  std::vector<SourceOp> ops;
  ops.reserve(static_cast<std::size_t>(p.r()));
  for (Index i = 0; i < p.r(); ++i) {
    const auto& b = p.bases[static_cast<std::size_t>(i)];
    SourceOp op;
    op.basis = b;
    op.u_eff = effective_u(p, i);
    // The program runs over orthonormal-tap variables Z'_i = x_i h'_i^T; the
    // balanced tap basis keeps the operator columns commensurate, which the
    // nuclear-norm geometry needs.
    op.psi = b->psi;
    op.l = b->l;
    CMat full = p.as2_mode ? CMat(CMat::Identity(n, n))
                           : CMat(b->v / static_cast<double>(n));
    if (p.mask) {
      CMat sel(static_cast<Index>(p.mask->size()), n);
      for (Index k = 0; k < sel.rows(); ++k)
        sel.row(k) = full.row((*p.mask)[static_cast<std::size_t>(k)]);
      op.front = std::move(sel);
    } else {
      op.front = std::move(full);
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

/// Dense known-entry constraint rows per source (rhs is zero).
struct ExtraConstraints {
  std::vector<CMat> e;  // per source: k_total x (n*l_i); empty cols if none
  Index k_total = 0;

  CVec apply(const std::vector<CMat>& zs) const {
    CVec out = CVec::Zero(k_total);
    for (std::size_t i = 0; i < zs.size(); ++i) {
      if (e[i].size() == 0) continue;
      out += e[i] * Eigen::Map<const CVec>(zs[i].data(), zs[i].size());
    }
    return out;
  }

  CMat adjoint_col(std::size_t i, const CVec& t, Index rows, Index cols) const {
    if (e[i].size() == 0) return CMat::Zero(rows, cols);
    CVec flat = e[i].adjoint() * t;
    return Eigen::Map<const CMat>(flat.data(), rows, cols);
  }
};

inline ExtraConstraints build_constraints(const DemixProblem& p) {
  const Index n = p.n();
  ExtraConstraints ec;
  ec.e.resize(static_cast<std::size_t>(p.r()));
  Index k_total = 0;
  for (const auto& ke : p.known_entries) {
    const Index li = p.bases[static_cast<std::size_t>(ke.source)]->l;
    for (std::size_t pair = 0; pair + 1 < ke.entries.size(); ++pair) {
      const auto& [na, va] = ke.entries[pair];
      const auto& [nb, vb] = ke.entries[pair + 1];
      if (va == 0.0 && vb == 0.0) continue;  // vacuous pair
      k_total += li;
    }
  }
  ec.k_total = k_total;
  if (k_total == 0) return ec;
  for (Index i = 0; i < p.r(); ++i) {
    const Index li = p.bases[static_cast<std::size_t>(i)]->l;
    ec.e[static_cast<std::size_t>(i)] = CMat::Zero(k_total, n * li);
  }
  Index row = 0;
  for (const auto& ke : p.known_entries) {
    auto& e = ec.e[static_cast<std::size_t>(ke.source)];
    const Index li = p.bases[static_cast<std::size_t>(ke.source)]->l;
    for (std::size_t pair = 0; pair + 1 < ke.entries.size(); ++pair) {
      const auto& [na, va] = ke.entries[pair];
      const auto& [nb, vb] = ke.entries[pair + 1];
      if (va == 0.0 && vb == 0.0) continue;
      for (Index c = 0; c < li; ++c) {
        e(row, c * p.n() + na) = vb;   // vb * Z[na, c]
        e(row, c * p.n() + nb) = -va;  // - va * Z[nb, c]
        ++row;
      }
    }
  }
  return ec;
}

/// The consensus z-update: projection onto the affine observation set, or the
/// penalized data-fit step when noise_epsilon is active.  All factorizations
/// are precomputed once per solve.
class AffineUpdate {
 public:
  AffineUpdate(const std::vector<SourceOp>& ops, const ExtraConstraints& ec,
               const CVec& y, double c, std::optional<double> mu)
      : ops_(ops), ec_(ec), y_(y), c_(c), mu_(mu) {
    const Index m_out = y.size();
    const Index k = ec.k_total;
    if (!mu_) {
      // Exact projection: gram of the stacked operator [M; E].
      CMat g(m_out + k, m_out + k);
      CMat gmm = CMat::Zero(m_out, m_out);
      for (const auto& op : ops_) gmm += op.gram();
      g.topLeftCorner(m_out, m_out) = gmm;
      if (k > 0) {
        CMat gme(m_out, k);
        for (Index t = 0; t < k; ++t) {
          CVec ek = CVec::Zero(k);
          ek(t) = 1.0;
          CVec col = CVec::Zero(m_out);
          for (std::size_t i = 0; i < ops_.size(); ++i) {
            const auto& op = ops_[i];
            col += op.forward(
                ec_.adjoint_col(i, ek, op.u_eff.cols(), op.l));
          }
          gme.col(t) = col;
        }
        CMat gee = CMat::Zero(k, k);
        for (const auto& e : ec_.e)
          if (e.size() != 0) gee += e * e.adjoint();
        g.topRightCorner(m_out, k) = gme;
        g.bottomLeftCorner(k, m_out) = gme.adjoint();
        g.bottomRightCorner(k, k) = gee;
      }
      factor(g);
    } else {
      // Penalized data fit: Woodbury core (c*mu I + M M^H), plus a KKT
      // Schur complement when hard constraint rows are present.
      CMat g = CMat::Zero(m_out, m_out);
      for (const auto& op : ops_) g += op.gram();
      g += (c_ * *mu_) * CMat::Identity(m_out, m_out);
      factor(g);
      if (k > 0) {
        he_.resize(static_cast<std::size_t>(k));
        CMat schur(k, k);
        for (Index t = 0; t < k; ++t) {
          CVec ek = CVec::Zero(k);
          ek(t) = 1.0;
          std::vector<CMat> rhs(ops_.size());
          for (std::size_t i = 0; i < ops_.size(); ++i)
            rhs[i] = ec_.adjoint_col(i, ek, ops_[i].u_eff.cols(), ops_[i].l);
          he_[static_cast<std::size_t>(t)] = h_inverse(rhs);
          const CVec col = ec_.apply(he_[static_cast<std::size_t>(t)]);
          schur.col(t) = col;
        }
        schur_ldlt_.compute(schur);
        if (schur_ldlt_.info() != Eigen::Success)
          throw numeric_error("solver: constraint Schur factorization failed");
      }
    }
  }

  bool gram_warning() const { return gram_warning_; }

  std::vector<CMat> update(const std::vector<CMat>& w) const {
    if (!mu_) return project(w);
    // z = H^{-1}(c w + (1/mu) M^H y), then KKT-correct onto E z = 0.
    std::vector<CMat> rhs(ops_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i)
      rhs[i] = c_ * w[i] + ops_[i].adjoint(y_) / *mu_;
    std::vector<CMat> z0 = h_inverse(rhs);
    if (ec_.k_total == 0) return z0;
    const CVec viol = ec_.apply(z0);
    const CVec nu = schur_ldlt_.solve(viol);
    for (std::size_t i = 0; i < ops_.size(); ++i)
      for (Index t = 0; t < ec_.k_total; ++t)
        z0[i] -= nu(t) * he_[static_cast<std::size_t>(t)][i];
    return z0;
  }

  /// ||y - M z|| and constraint violation, combined in quadrature.
  double feasibility(const std::vector<CMat>& zs) const {
    CVec res = y_;
    for (std::size_t i = 0; i < ops_.size(); ++i)
      res -= ops_[i].forward(zs[i]);
    double f2 = res.squaredNorm();
    if (ec_.k_total > 0) f2 += ec_.apply(zs).squaredNorm();
    return std::sqrt(f2);
  }

 private:
  void factor(CMat g) {
    ldlt_.compute(g);
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    if (ldlt_.info() == Eigen::Success) {
      const auto d = ldlt_.vectorD();
      for (Index i = 0; i < d.size(); ++i) {
        const double a = std::abs(d(i));
        dmin = std::min(dmin, a);
        dmax = std::max(dmax, a);
      }
    }
    if (ldlt_.info() != Eigen::Success || dmax == 0.0 ||
        dmin < 1e-12 * dmax) {
      // Rank-deficient observation operator (tight mask, repeated rows...):
      // regularize the projection and flag it.
      gram_warning_ = true;
      const double ridge =
          std::max(1e-12 * dmax, 1e-14 * (g.trace().real() + 1.0));
      g += ridge * CMat::Identity(g.rows(), g.cols());
      ldlt_.compute(g);
      if (ldlt_.info() != Eigen::Success)
        throw numeric_error("solver: observation Gram factorization failed");
    }
  }

  /// Exact affine projection z = w + K^H G^{-1}([y;0] - K w), K = [M; E].
  std::vector<CMat> project(const std::vector<CMat>& w) const {
    const Index m_out = y_.size();
    CVec res(m_out + ec_.k_total);
    CVec mw = CVec::Zero(m_out);
    for (std::size_t i = 0; i < ops_.size(); ++i)
      mw += ops_[i].forward(w[i]);
    res.head(m_out) = y_ - mw;
    if (ec_.k_total > 0) res.tail(ec_.k_total) = -ec_.apply(w);
    const CVec s = ldlt_.solve(res);
    std::vector<CMat> z(ops_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      z[i] = w[i] + ops_[i].adjoint(s.head(m_out));
      if (ec_.k_total > 0)
        z[i] += ec_.adjoint_col(i, s.tail(ec_.k_total), ops_[i].u_eff.cols(),
                                ops_[i].l);
    }
    return z;
  }

  /// (c I + (1/mu) M^H M)^{-1} r via Woodbury on the m_out-sized core.
  std::vector<CMat> h_inverse(const std::vector<CMat>& r) const {
    CVec mr = CVec::Zero(y_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i)
      mr += ops_[i].forward(r[i]);
    const CVec g = ldlt_.solve(mr);
    std::vector<CMat> out(ops_.size());
    for (std::size_t i = 0; i < ops_.size(); ++i)
      out[i] = (r[i] - ops_[i].adjoint(g)) / c_;
    return out;
  }

  const std::vector<SourceOp>& ops_;
  const ExtraConstraints& ec_;
  CVec y_;
  double c_;
  std::optional<double> mu_;
  Eigen::LDLT<CMat> ldlt_;
  Eigen::LDLT<CMat> schur_ldlt_;
  std::vector<std::vector<CMat>> he_;  // H^{-1} E^H, column by column
  bool gram_warning_ = false;
};

struct AdmmState {
  std::vector<CMat> z, a, b, ua, ub;
  bool initialized = false;
};

struct AdmmMetrics {
  double primal = 0.0, dual = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

inline double stack_norm(const std::vector<CMat>& v) {
  double acc = 0.0;
  for (const auto& m : v) acc += m.squaredNorm();
  return std::sqrt(acc);
}

/// Two-split consensus scheme: A carries the (weighted) nuclear prox, B the
/// row-sparsity prox, Z the affine observation step; scaled duals UA, UB.
inline AdmmMetrics admm_run(const std::vector<SourceOp>& ops,
                            const AffineUpdate& affine,
                            const SolverConfig& cfg,
                            const std::vector<double>& etas,
                            const std::vector<double>& betas,
                            const std::vector<RVec>* nuc_weights,
                            const std::vector<RVec>* row_weights,
                            AdmmState& st, bool record_trace) {
  const std::size_t r = ops.size();
  const double rho = cfg.admm_rho;
  Index dim_total = 0;
  for (const auto& op : ops) dim_total += op.dim();

  if (!st.initialized) {
    st.z.resize(r);
    st.a.resize(r);
    st.b.resize(r);
    st.ua.resize(r);
    st.ub.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
      const Index n = ops[i].u_eff.cols(), l = ops[i].l;
      st.z[i] = CMat::Zero(n, l);
      st.a[i] = st.z[i];
      st.b[i] = st.z[i];
      st.ua[i] = st.z[i];
      st.ub[i] = st.z[i];
    }
    st.initialized = true;
  }

  AdmmMetrics m;
  const double sqrt_dim = std::sqrt(2.0 * static_cast<double>(dim_total));
  for (Index it = 0; it < cfg.max_iter; ++it) {
    for (std::size_t i = 0; i < r; ++i) {
      const Index nsv = std::min(st.z[i].rows(), st.z[i].cols());
      RVec taus = RVec::Constant(nsv, etas[i] / rho);
      if (nuc_weights)
        taus = (etas[i] / rho) * (*nuc_weights)[i];
      st.a[i] = svt_weighted(st.z[i] - st.ua[i], taus);
      if (row_weights)
        st.b[i] = row_soft_threshold_weighted(
            st.z[i] - st.ub[i], (betas[i] / rho) * (*row_weights)[i]);
      else
        st.b[i] = row_soft_threshold(st.z[i] - st.ub[i], betas[i] / rho);
    }
    std::vector<CMat> w(r);
    for (std::size_t i = 0; i < r; ++i)
      w[i] = 0.5 * (st.a[i] + st.ua[i] + st.b[i] + st.ub[i]);
    const std::vector<CMat> z_old = st.z;
    st.z = affine.update(w);

    double pri2 = 0.0, dz2 = 0.0, ab2 = 0.0, z2 = 0.0, u2 = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      st.ua[i] += st.a[i] - st.z[i];
      st.ub[i] += st.b[i] - st.z[i];
      pri2 += (st.a[i] - st.z[i]).squaredNorm() +
              (st.b[i] - st.z[i]).squaredNorm();
      dz2 += (st.z[i] - z_old[i]).squaredNorm();
      ab2 += st.a[i].squaredNorm() + st.b[i].squaredNorm();
      z2 += st.z[i].squaredNorm();
      u2 += st.ua[i].squaredNorm() + st.ub[i].squaredNorm();
    }
    m.primal = std::sqrt(pri2);
    m.dual = rho * std::sqrt(2.0 * dz2);
    m.iterations = it + 1;
    if (record_trace) {
      double obj = 0.0;
      for (std::size_t i = 0; i < r; ++i)
        obj += etas[i] * nuclear_norm(st.z[i]) + betas[i] * l21_norm(st.z[i]);
      m.objective_trace.push_back(obj);
    }
    const double eps_pri = sqrt_dim * cfg.tol_abs +
                           cfg.tol_rel * std::max(std::sqrt(ab2),
                                                  std::sqrt(2.0 * z2));
    const double eps_dual =
        sqrt_dim * cfg.tol_abs + cfg.tol_rel * rho * std::sqrt(u2);
    if (m.primal <= eps_pri && m.dual <= eps_dual) {
      m.converged = true;
      break;
    }
  }
  return m;
}

inline void validate_config(const SolverConfig& cfg, Index r) {
  if (!cfg.etas.empty() && static_cast<Index>(cfg.etas.size()) != r)
    throw parameter_error("solver: etas must be empty or length R");
  if (!cfg.betas.empty() && static_cast<Index>(cfg.betas.size()) != r)
    throw parameter_error("solver: betas must be empty or length R");
  for (const double e : cfg.etas)
    if (e < 0) throw parameter_error("solver: etas must be >= 0");
  for (const double b : cfg.betas)
    if (b < 0) throw parameter_error("solver: betas must be >= 0");
  if (cfg.beta_default < 0)
    throw parameter_error("solver: beta_default must be >= 0");
  if (!(cfg.admm_rho > 0))
    throw parameter_error("solver: admm_rho must be > 0");
  if (cfg.max_iter < 1) throw parameter_error("solver: max_iter must be >= 1");
  if (!(cfg.tol_abs > 0) || !(cfg.tol_rel > 0))
    throw parameter_error("solver: tolerances must be > 0");
  if (!(cfg.logdet_delta > 0))
    throw parameter_error("solver: logdet_delta must be > 0");
  if (cfg.logdet_row_delta < 0)
    throw parameter_error("solver: logdet_row_delta must be >= 0");
  if (!(cfg.logdet_anneal > 0) || cfg.logdet_anneal > 1)
    throw parameter_error("solver: logdet_anneal must be in (0, 1]");
  if (cfg.logdet_outer_iters < 1)
    throw parameter_error("solver: logdet_outer_iters must be >= 1");
  if (cfg.noise_epsilon && *cfg.noise_epsilon < 0)
    throw parameter_error("solver: noise_epsilon must be >= 0");
  if (cfg.refine_pool < 1 || cfg.refine_pool > 20)
    throw parameter_error("solver: refine_pool must be in [1, 20]");
  if (cfg.refine_kmax < 1)
    throw parameter_error("solver: refine_kmax must be >= 1");
  if (cfg.refine_restarts < 0)
    throw parameter_error("solver: refine_restarts must be >= 0");
  if (cfg.refine_jitter < 0)
    throw parameter_error("solver: refine_jitter must be >= 0");
  if (cfg.refine && cfg.refine_budget < 1)
    throw parameter_error("solver: refine_budget must be >= 1");
}

struct RawSolution {
  std::vector<CMat> zs;
  AdmmMetrics metrics;
  double feasibility = 0.0;
  bool numeric_warning = false;
  bool refined = false;
  std::vector<double> surrogate_trace;
};

/// Support refinement only covers the pristine observation model: the
/// restricted fits compare against the full, exact mixture.
inline bool refine_eligible(const DemixProblem& p, const SolverConfig& cfg) {
  return cfg.refine && !p.mask && !p.as2_mode && p.known_entries.empty() &&
         p.noise_sigma == 0.0 &&
         (!cfg.noise_epsilon || *cfg.noise_epsilon == 0.0) && p.r() <= 2;
}

/// Pipeline around the reweighted scheme: candidate solutions (the final
/// iterate, a row-sparsity-only reweighted solve, and perturbed-weight
/// restarts) nominate per-source vertex pools; pool supports are fitted
/// exactly and certified (feasible + rank one).  Returns true and replaces
/// out.zs on certification.
inline bool refine_certified(const DemixProblem& p, const SolverConfig& cfg,
                             const std::vector<SourceOp>& ops,
                             const AffineUpdate& affine,
                             const AdmmState& first_pass,
                             const std::vector<double>& deltas,
                             RawSolution& out) {
  const Index r = p.r();
  const int kmax = static_cast<int>(cfg.refine_kmax);
  const int poolm = static_cast<int>(cfg.refine_pool);
  std::uint64_t budget = cfg.refine_budget;
  std::vector<CMat> ms;
  ms.reserve(p.bases.size());
  for (const auto& b : p.bases) ms.push_back(transfer_matrix(*b));

  // Companion candidate: row-sparsity-only reweighting (vanishing nuclear
  // weight).  Its row profile often concentrates the true support where the
  // mixed objective blurs it, and vice versa.
  std::vector<CMat> rowonly_z;
  {
    const std::vector<double> etas1(static_cast<std::size_t>(r), 1e-8);
    const std::vector<double> betas1(static_cast<std::size_t>(r), 1.0);
    AdmmState st;
    admm_run(ops, affine, cfg, etas1, betas1, nullptr, nullptr, st, false);
    std::vector<double> eps(static_cast<std::size_t>(r), 1e-12);
    std::vector<RVec> rw(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) {
      const RVec rn = st.z[static_cast<std::size_t>(i)].rowwise().norm();
      const double mx = rn.size() ? rn.maxCoeff() : 0.0;
      eps[static_cast<std::size_t>(i)] =
          std::max(1e-2 * (mx > 0.0 ? mx : 1.0), 1e-12);
      RVec& w = rw[static_cast<std::size_t>(i)];
      w.resize(rn.size());
      for (Index j = 0; j < rn.size(); ++j)
        w(j) = 1.0 / (rn(j) + eps[static_cast<std::size_t>(i)]);
    }
    for (Index outer = 1; outer < cfg.logdet_outer_iters; ++outer) {
      admm_run(ops, affine, cfg, etas1, betas1, nullptr, &rw, st, false);
      for (Index i = 0; i < r; ++i) {
        const RVec rn = st.z[static_cast<std::size_t>(i)].rowwise().norm();
        RVec& w = rw[static_cast<std::size_t>(i)];
        for (Index j = 0; j < rn.size(); ++j)
          w(j) = 1.0 / (rn(j) + eps[static_cast<std::size_t>(i)]);
      }
    }
    rowonly_z = std::move(st.z);
  }

  auto pools_from = [&](const std::vector<CMat>& primary) {
    std::vector<std::vector<int>> pools(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i)
      pools[static_cast<std::size_t>(i)] = pool_union(
          {row_rank_order(primary[static_cast<std::size_t>(i)]),
           row_rank_order(rowonly_z[static_cast<std::size_t>(i)])},
          poolm);
    return pools;
  };

  auto accept = [&](SupportFit&& fit) {
    out.zs = std::move(fit.zs);
    out.feasibility = affine.feasibility(out.zs);
    out.metrics.converged = true;
    out.refined = true;
    return true;
  };

  const auto pools = pools_from(out.zs);
  SupportFit fit = enumerate_supports(p.bases, ms, p.y, pools, kmax, &budget);
  if (fit.certified) return accept(std::move(fit));
  if (cfg.refine_wildcard && budget > 0) {
    fit = wildcard_supports(p.bases, ms, p.y, pools, kmax, &budget);
    if (fit.certified) return accept(std::move(fit));
  }
  if (cfg.refine_restarts < 1 || budget == 0) return false;

  // Perturbed restarts: re-run the weighted passes from the shared first
  // iterate with log-normal jitter on the singular-value weights, and mine
  // each restart's row profile for fresh pools.
  const std::vector<double> etas =
      cfg.etas.empty() ? std::vector<double>(static_cast<std::size_t>(r), 1.0)
                       : cfg.etas;
  std::vector<double> betas =
      cfg.betas.empty()
          ? std::vector<double>(static_cast<std::size_t>(r), cfg.beta_default)
          : cfg.betas;
  std::vector<RVec> w_base(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) {
    const RVec sv = singular_values(first_pass.z[static_cast<std::size_t>(i)]);
    RVec& w = w_base[static_cast<std::size_t>(i)];
    w.resize(sv.size());
    for (Index j = 0; j < sv.size(); ++j)
      w(j) = 1.0 / (sv(j) + deltas[static_cast<std::size_t>(i)]);
  }
  for (Index k = 1; k <= cfg.refine_restarts && budget > 0; ++k) {
    auto rng = make_rng(
        derive_seed(p.seed, 0x726566696e65ULL + static_cast<std::uint64_t>(k)));
    std::vector<RVec> weights = w_base;
    for (Index i = 0; i < r; ++i) {
      RVec& w = weights[static_cast<std::size_t>(i)];
      const RVec g = gaussian_vector(w.size(), rng);
      for (Index j = 0; j < w.size(); ++j)
        w(j) *= std::exp(cfg.refine_jitter * g(j));
    }
    AdmmState st = first_pass;
    for (Index outer = 1; outer < cfg.logdet_outer_iters; ++outer) {
      admm_run(ops, affine, cfg, etas, betas, &weights, nullptr, st, false);
      for (Index i = 0; i < r; ++i) {
        const RVec sv = singular_values(st.z[static_cast<std::size_t>(i)]);
        RVec& w = weights[static_cast<std::size_t>(i)];
        for (Index j = 0; j < sv.size(); ++j)
          w(j) = 1.0 / (sv(j) + deltas[static_cast<std::size_t>(i)]);
      }
    }
    const auto rp = pools_from(st.z);
    fit = enumerate_supports(p.bases, ms, p.y, rp, kmax, &budget);
    if (fit.certified) return accept(std::move(fit));
    if (cfg.refine_wildcard && budget > 0) {
      fit = wildcard_supports(p.bases, ms, p.y, rp, kmax, &budget);
      if (fit.certified) return accept(std::move(fit));
    }
  }
  return false;
}

/// Shared driver for the three relaxations over an arbitrary source list.
inline RawSolution solve_lifted(const DemixProblem& p, const SolverConfig& cfg,
                                SolveMethod method) {
  const Index r = p.r();
  if (r < 1) throw parameter_error("solver: problem has no sources");
  validate_config(cfg, r);
  std::vector<double> etas =
      cfg.etas.empty() ? std::vector<double>(static_cast<std::size_t>(r), 1.0)
                       : cfg.etas;
  std::vector<double> betas =
      cfg.betas.empty()
          ? std::vector<double>(static_cast<std::size_t>(r), cfg.beta_default)
          : cfg.betas;
  if (method == SolveMethod::nuclear_only)
    betas.assign(static_cast<std::size_t>(r), 0.0);

  const auto ops = build_ops(p);
  const auto ec = build_constraints(p);
  std::optional<double> mu = cfg.noise_epsilon;
  if (mu && *mu == 0.0) mu.reset();  // epsilon 0 means exact constraint
  const AffineUpdate affine(ops, ec, p.y, 2.0 * cfg.admm_rho, mu);

  RawSolution out;
  out.numeric_warning = affine.gram_warning();
  AdmmState st;
  AdmmState first_pass;  // unweighted iterate, kept for refinement restarts
  const bool want_refine =
      method == SolveMethod::logdet && refine_eligible(p, cfg);
  const Index outers =
      method == SolveMethod::logdet ? cfg.logdet_outer_iters : 1;
  std::vector<RVec> weights(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) {
    const auto& b = *p.bases[static_cast<std::size_t>(i)];
    weights[static_cast<std::size_t>(i)] =
        RVec::Ones(std::min(b.n, b.l));
  }
  // Per-source smoothing levels, set from the first (unweighted) pass so
  // sources of very different magnitude sharpen at comparable relative
  // rates: delta_i for singular values, eps_i for row norms.
  std::vector<double> deltas(static_cast<std::size_t>(r), cfg.logdet_delta);
  const bool reweight_rows = cfg.logdet_row_delta > 0.0;
  std::vector<RVec> row_weights(static_cast<std::size_t>(r));
  std::vector<double> epsilons(static_cast<std::size_t>(r), 0.0);
  Index total_iters = 0;
  std::vector<double> full_trace;
  for (Index outer = 0; outer < outers; ++outer) {
    const AdmmMetrics met = admm_run(
        ops, affine, cfg, etas, betas, outer == 0 ? nullptr : &weights,
        (outer == 0 || !reweight_rows) ? nullptr : &row_weights, st,
        cfg.record_objective_trace);
    total_iters += met.iterations;
    if (outer == 0 && want_refine) first_pass = st;
    full_trace.insert(full_trace.end(), met.objective_trace.begin(),
                      met.objective_trace.end());
    out.metrics = met;
    out.metrics.iterations = total_iters;
    out.metrics.objective_trace = full_trace;

    if (method != SolveMethod::logdet) break;
    std::vector<RVec> sigmas(static_cast<std::size_t>(r));
    std::vector<RVec> rownorms(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) {
      const CMat& z = st.z[static_cast<std::size_t>(i)];
      sigmas[static_cast<std::size_t>(i)] = singular_values(z);
      rownorms[static_cast<std::size_t>(i)] = z.rowwise().norm();
    }
    if (outer == 0) {
      double sig_max = 0.0, row_max = 0.0;
      for (Index i = 0; i < r; ++i) {
        if (sigmas[static_cast<std::size_t>(i)].size() > 0)
          sig_max =
              std::max(sig_max, sigmas[static_cast<std::size_t>(i)](0));
        if (rownorms[static_cast<std::size_t>(i)].size() > 0)
          row_max = std::max(
              row_max, rownorms[static_cast<std::size_t>(i)].maxCoeff());
      }
      for (Index i = 0; i < r; ++i) {
        const auto& s = sigmas[static_cast<std::size_t>(i)];
        // A vanished source falls back to the global scale so its weights
        // stay finite and it can re-enter in later passes.
        const double scale = (s.size() > 0 && s(0) > 0.0) ? s(0) : sig_max;
        deltas[static_cast<std::size_t>(i)] =
            std::max(cfg.logdet_delta * scale, 1e-12);
        const auto& rn = rownorms[static_cast<std::size_t>(i)];
        const double rscale =
            (rn.size() > 0 && rn.maxCoeff() > 0.0) ? rn.maxCoeff() : row_max;
        epsilons[static_cast<std::size_t>(i)] =
            std::max(cfg.logdet_row_delta * rscale, 1e-12);
      }
    }
    double surrogate = 0.0;
    for (Index i = 0; i < r; ++i) {
      const auto& s = sigmas[static_cast<std::size_t>(i)];
      const double di = deltas[static_cast<std::size_t>(i)];
      for (Index j = 0; j < s.size(); ++j)
        surrogate += etas[static_cast<std::size_t>(i)] * std::log(s(j) + di);
      const double bi = betas[static_cast<std::size_t>(i)];
      if (reweight_rows) {
        const auto& rn = rownorms[static_cast<std::size_t>(i)];
        const double ei = epsilons[static_cast<std::size_t>(i)];
        for (Index j = 0; j < rn.size(); ++j)
          surrogate += bi * std::log(rn(j) + ei);
      } else {
        surrogate += bi * l21_norm(st.z[static_cast<std::size_t>(i)]);
      }
    }
    out.surrogate_trace.push_back(surrogate);
    if (outer + 1 < outers) {
      for (Index i = 0; i < r; ++i) {
        const auto& s = sigmas[static_cast<std::size_t>(i)];
        const double di = deltas[static_cast<std::size_t>(i)];
        RVec& w = weights[static_cast<std::size_t>(i)];
        for (Index j = 0; j < s.size(); ++j) w(j) = 1.0 / (s(j) + di);
        if (reweight_rows) {
          const auto& rn = rownorms[static_cast<std::size_t>(i)];
          const double ei = epsilons[static_cast<std::size_t>(i)];
          RVec& rw = row_weights[static_cast<std::size_t>(i)];
          rw.resize(rn.size());
          for (Index j = 0; j < rn.size(); ++j) rw(j) = 1.0 / (rn(j) + ei);
        }
      }
      if (cfg.logdet_anneal < 1.0) {
        for (double& d : deltas) d = std::max(d * cfg.logdet_anneal, 1e-12);
        for (double& e : epsilons)
          e = std::max(e * cfg.logdet_anneal, 1e-12);
      }
    }
  }
  out.zs = st.z;
  out.feasibility = affine.feasibility(out.zs);
  if (want_refine)
    refine_certified(p, cfg, ops, affine, first_pass, deltas, out);
  return out;
}

/// True when the whole instance is real-valued, so solution matrices may be
/// reported with imaginary parts stripped.
inline bool problem_is_real(const DemixProblem& p) {
  const double ytol = 1e-12 * std::max(1.0, p.y.size() ? p.y.cwiseAbs().maxCoeff() : 0.0);
  if (p.y.size() && max_imag(p.y) > ytol) return false;
  for (const auto& b : p.bases) {
    if (max_imag(b->v) > 1e-12) return false;
    if (max_imag(b->psi) > 1e-12) return false;
  }
  return true;
}

inline void strip_imag_in_place(CMat& m, double tol, bool& warned) {
  if (max_imag(m) <= tol)
    m = m.real().cast<Complex>();
  else
    warned = true;
}

}  // namespace detail

namespace detail {

inline LiftedSolution finalize_multi(const DemixProblem& p,
                                     const SolverConfig& cfg,
                                     RawSolution raw) {
  const Index r = p.r();
  std::vector<double> etas =
      cfg.etas.empty() ? std::vector<double>(static_cast<std::size_t>(r), 1.0)
                       : cfg.etas;
  std::vector<double> betas =
      cfg.betas.empty()
          ? std::vector<double>(static_cast<std::size_t>(r), cfg.beta_default)
          : cfg.betas;

  LiftedSolution sol;
  sol.zs = std::move(raw.zs);
  sol.primal_residual = raw.metrics.primal;
  sol.dual_residual = raw.metrics.dual;
  sol.iterations = raw.metrics.iterations;
  sol.converged = raw.metrics.converged;
  sol.feasibility = raw.feasibility;
  sol.numeric_warning = raw.numeric_warning;
  sol.refined = raw.refined;
  sol.objective_trace = std::move(raw.metrics.objective_trace);
  sol.surrogate_trace = std::move(raw.surrogate_trace);

  if (problem_is_real(p)) {
    double scale = 0.0;
    for (const auto& z : sol.zs)
      if (z.size()) scale = std::max(scale, z.cwiseAbs().maxCoeff());
    const double tol = 1e-8 * std::max(1.0, scale);
    for (auto& z : sol.zs)
      strip_imag_in_place(z, tol, sol.numeric_warning);
  }

  sol.objective = lifted_objective(sol.zs, etas, betas);

  sol.xs_hat.resize(static_cast<std::size_t>(r));
  sol.hs_hat.resize(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) {
    const auto& b = *p.bases[static_cast<std::size_t>(i)];
    const CMat& z = sol.zs[static_cast<std::size_t>(i)];
    if (z.norm() == 0.0) {
      sol.xs_hat[static_cast<std::size_t>(i)] = CVec::Zero(b.n);
      sol.hs_hat[static_cast<std::size_t>(i)] = CVec::Zero(b.l);
    } else {
      auto [x, h] = extract_rank1(z, b);
      sol.xs_hat[static_cast<std::size_t>(i)] = std::move(x);
      sol.hs_hat[static_cast<std::size_t>(i)] = std::move(h);
    }
  }
  return sol;
}

}  // namespace detail

/// Nuclear + row-sparsity relaxation with hard (or, under noise_epsilon,
/// penalized) data fit.
inline LiftedSolution solve_convex(const DemixProblem& p,
                                   const SolverConfig& cfg = {}) {
  return detail::finalize_multi(
      p, cfg, detail::solve_lifted(p, cfg, SolveMethod::convex));
}

/// Nuclear-norm-only variant (row-sparsity weights forced to zero).
inline LiftedSolution solve_nuclear_only(const DemixProblem& p,
                                         const SolverConfig& cfg = {}) {
  SolverConfig c = cfg;
  c.betas.assign(static_cast<std::size_t>(p.r()), 0.0);
  return detail::finalize_multi(
      p, c, detail::solve_lifted(p, c, SolveMethod::nuclear_only));
}

/// Iteratively reweighted (log-det surrogate) scheme; the first inner pass
/// uses uniform weights, so one outer iteration reproduces solve_convex.
inline LiftedSolution solve_logdet(const DemixProblem& p,
                                   const SolverConfig& cfg = {}) {
  return detail::finalize_multi(
      p, cfg, detail::solve_lifted(p, cfg, SolveMethod::logdet));
}

/// Single-graph sum formulation over Z = sum_i Z_i: one lifted variable on
/// the shared basis.
inline SumSolution solve_single_graph_sum(const DemixProblem& p,
                                          const SolverConfig& cfg = {},
                                          SolveMethod method = SolveMethod::convex) {
  if (!p.single_graph())
    throw model_error("solve_single_graph_sum: bases are not identical");
  if (p.as2_mode)
    throw model_error(
        "solve_single_graph_sum: AS2 resampling is per-source; sum "
        "formulation undefined");
  if (!p.known_entries.empty())
    throw parameter_error(
        "solve_single_graph_sum: known-entry constraints are per-source; "
        "unsupported in the sum formulation");
  DemixProblem ps = p;
  ps.bases = {p.bases.front()};
  SolverConfig cs = cfg;
  if (!cfg.etas.empty()) cs.etas = {cfg.etas.front()};
  if (!cfg.betas.empty()) cs.betas = {cfg.betas.front()};
  // The sum variable targets sum_i Z_i, which has rank R: the rank-one
  // certificate of support refinement can never fire, so skip the search.
  if (p.r() > 1) cs.refine = false;
  detail::validate_config(cs, 1);
  detail::RawSolution raw = detail::solve_lifted(ps, cs, method);

  SumSolution s;
  s.z = std::move(raw.zs.front());
  s.primal_residual = raw.metrics.primal;
  s.dual_residual = raw.metrics.dual;
  s.iterations = raw.metrics.iterations;
  s.converged = raw.metrics.converged;
  s.feasibility = raw.feasibility;
  s.numeric_warning = raw.numeric_warning;
  s.objective_trace = std::move(raw.metrics.objective_trace);
  s.surrogate_trace = std::move(raw.surrogate_trace);
  if (detail::problem_is_real(ps)) {
    const double scale = s.z.size() ? s.z.cwiseAbs().maxCoeff() : 0.0;
    detail::strip_imag_in_place(s.z, 1e-8 * std::max(1.0, scale),
                                s.numeric_warning);
  }
  const double eta = cs.etas.empty() ? 1.0 : cs.etas.front();
  const double beta = cs.betas.empty() ? cs.beta_default : cs.betas.front();
  s.objective = eta * nuclear_norm(s.z) + beta * l21_norm(s.z);
  return s;
}

}  // namespace graphdemix
