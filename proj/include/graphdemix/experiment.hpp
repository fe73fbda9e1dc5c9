#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/datasets.hpp"
#include "graphdemix/graph.hpp"
#include "graphdemix/io.hpp"
#include "graphdemix/model.hpp"
#include "graphdemix/single_graph.hpp"
#include "graphdemix/solver.hpp"
#include "graphdemix/spectral.hpp"
#include "graphdemix/stats.hpp"
#include "graphdemix/theory.hpp"

namespace graphdemix {

enum class ExperimentKind {
  single_graph_sweep,   ///< shared graph, (N, R, S) grid, SVD separation
  similarity_sweep,     ///< BA graph pairs over an edge-overlap grid
  multi_graph,          ///< independent ER graphs over an N grid
  noise_sweep,          ///< fixed graph, sigma grid, paired instances
  predictor_study       ///< fixed ER pairs ranked by the rho_bar predictor
};

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::single_graph_sweep: return "single_graph_sweep";
    case ExperimentKind::similarity_sweep: return "similarity_sweep";
    case ExperimentKind::multi_graph: return "multi_graph";
    case ExperimentKind::noise_sweep: return "noise_sweep";
    case ExperimentKind::predictor_study: return "predictor_study";
  }
  throw parameter_error("to_string: unknown experiment kind");
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "single_graph_sweep") return ExperimentKind::single_graph_sweep;
  if (s == "similarity_sweep") return ExperimentKind::similarity_sweep;
  if (s == "multi_graph") return ExperimentKind::multi_graph;
  if (s == "noise_sweep") return ExperimentKind::noise_sweep;
  if (s == "predictor_study") return ExperimentKind::predictor_study;
  throw parse_error("unknown experiment kind: " + s);
}

inline std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::convex: return "convex";
    case SolveMethod::nuclear_only: return "nuclear_only";
    case SolveMethod::logdet: return "logdet";
  }
  throw parameter_error("to_string: unknown solve method");
}

inline SolveMethod solve_method_from_string(const std::string& s) {
  if (s == "convex") return SolveMethod::convex;
  if (s == "nuclear_only") return SolveMethod::nuclear_only;
  if (s == "logdet") return SolveMethod::logdet;
  throw parse_error("unknown solve method: " + s);
}

inline GsoKind gso_kind_from_string(const std::string& s) {
  if (s == "adjacency") return GsoKind::adjacency;
  if (s == "laplacian") return GsoKind::laplacian;
  throw parse_error("unknown shift-operator kind: " + s);
}

/// How trial graphs are produced.
struct GraphSpec {
  std::string generator = "er";  ///< er | ba_pair | karate | file
  Index n = 50;
  double p = 0.15;                     ///< ER edge probability
  std::vector<std::string> files;      ///< edge-list paths when generator=file
  GsoKind gso = GsoKind::adjacency;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::multi_graph;
  GraphSpec graph;
  std::vector<Index> n_grid;                    ///< defaults to {graph.n}
  std::vector<double> alpha_grid;               ///< similarity_sweep
  std::vector<double> sigma_grid;               ///< noise_sweep
  std::vector<std::pair<Index, Index>> rs_grid; ///< single_graph_sweep (R,S)
  Index r = 2;
  Index l = 3;
  Index s = 3;
  double noise_sigma = 0.0;  ///< fixed sigma for non-noise kinds
  Index trials = 50;
  std::uint64_t seed = 1;
  SolverConfig solver;
  SolveMethod method = SolveMethod::convex;
  double threshold = 1e-3;
  int workers = 1;
  Index pairs = 10;            ///< predictor_study graph-pair count
  std::vector<double> p_grid;  ///< predictor_study densities, cycled per pair
  bool dump_trials = false;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  double de = 0.0;
  Index iterations = 0;
  bool converged = false;
};

struct ResultRow {
  std::map<std::string, double> grid;  ///< sorted keys drive the CSV layout
  Index trials = 0;
  double success_rate = 0.0;
  double median_de = 0.0;
  double mean_iterations = 0.0;
  double wall_time = 0.0;  ///< seconds summed over trials; not deterministic
  std::vector<TrialRecord> trial_records;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  Json metadata;
};

// ---------------------------------------------------------------------------
// Config (de)serialization
// ---------------------------------------------------------------------------

inline Json solver_config_to_json(const SolverConfig& c) {
  Json j;
  if (!c.etas.empty()) j["etas"] = c.etas;
  if (!c.betas.empty()) j["betas"] = c.betas;
  j["beta_default"] = c.beta_default;
  j["admm_rho"] = c.admm_rho;
  j["max_iter"] = c.max_iter;
  j["tol_abs"] = c.tol_abs;
  j["tol_rel"] = c.tol_rel;
  j["logdet_delta"] = c.logdet_delta;
  j["logdet_outer_iters"] = c.logdet_outer_iters;
  j["logdet_row_delta"] = c.logdet_row_delta;
  j["logdet_anneal"] = c.logdet_anneal;
  if (c.noise_epsilon) j["noise_epsilon"] = *c.noise_epsilon;
  j["record_objective_trace"] = c.record_objective_trace;
  j["refine"] = c.refine;
  j["refine_pool"] = c.refine_pool;
  j["refine_kmax"] = c.refine_kmax;
  j["refine_wildcard"] = c.refine_wildcard;
  j["refine_restarts"] = c.refine_restarts;
  j["refine_jitter"] = c.refine_jitter;
  j["refine_budget"] = c.refine_budget;
  return j;
}

inline SolverConfig solver_config_from_json(const Json& j) {
  SolverConfig c;
  if (j.contains("etas")) c.etas = j["etas"].get<std::vector<double>>();
  if (j.contains("betas")) c.betas = j["betas"].get<std::vector<double>>();
  c.beta_default = j.value("beta_default", c.beta_default);
  c.admm_rho = j.value("admm_rho", c.admm_rho);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.tol_abs = j.value("tol_abs", c.tol_abs);
  c.tol_rel = j.value("tol_rel", c.tol_rel);
  c.logdet_delta = j.value("logdet_delta", c.logdet_delta);
  c.logdet_outer_iters = j.value("logdet_outer_iters", c.logdet_outer_iters);
  c.logdet_row_delta = j.value("logdet_row_delta", c.logdet_row_delta);
  c.logdet_anneal = j.value("logdet_anneal", c.logdet_anneal);
  if (j.contains("noise_epsilon") && !j["noise_epsilon"].is_null())
    c.noise_epsilon = j["noise_epsilon"].get<double>();
  c.record_objective_trace =
      j.value("record_objective_trace", c.record_objective_trace);
  c.refine = j.value("refine", c.refine);
  c.refine_pool = j.value("refine_pool", c.refine_pool);
  c.refine_kmax = j.value("refine_kmax", c.refine_kmax);
  c.refine_wildcard = j.value("refine_wildcard", c.refine_wildcard);
  c.refine_restarts = j.value("refine_restarts", c.refine_restarts);
  c.refine_jitter = j.value("refine_jitter", c.refine_jitter);
  c.refine_budget = j.value("refine_budget", c.refine_budget);
  return c;
}

inline Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["schema"] = 1;
  j["kind"] = to_string(c.kind);
  j["graph"] = {{"generator", c.graph.generator},
                {"n", c.graph.n},
                {"p", c.graph.p},
                {"gso", to_string(c.graph.gso)}};
  if (!c.graph.files.empty()) j["graph"]["files"] = c.graph.files;
  if (!c.n_grid.empty()) j["n_grid"] = c.n_grid;
  if (!c.alpha_grid.empty()) j["alpha_grid"] = c.alpha_grid;
  if (!c.sigma_grid.empty()) j["sigma_grid"] = c.sigma_grid;
  if (!c.rs_grid.empty()) {
    Json a = Json::array();
    for (const auto& [rr, ss] : c.rs_grid) a.push_back(Json::array({rr, ss}));
    j["rs_grid"] = a;
  }
  j["r"] = c.r;
  j["l"] = c.l;
  j["s"] = c.s;
  j["noise_sigma"] = c.noise_sigma;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["solver"] = solver_config_to_json(c.solver);
  j["method"] = to_string(c.method);
  j["threshold"] = c.threshold;
  j["workers"] = c.workers;
  j["pairs"] = c.pairs;
  if (!c.p_grid.empty()) j["p_grid"] = c.p_grid;
  j["dump_trials"] = c.dump_trials;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  if (j.value("schema", 0) != 1)
    throw parse_error("experiment config: unsupported or missing schema");
  ExperimentConfig c;
  c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("graph")) {
    const Json& g = j["graph"];
    c.graph.generator = g.value("generator", c.graph.generator);
    c.graph.n = g.value("n", c.graph.n);
    c.graph.p = g.value("p", c.graph.p);
    if (g.contains("files"))
      c.graph.files = g["files"].get<std::vector<std::string>>();
    if (g.contains("gso"))
      c.graph.gso = gso_kind_from_string(g["gso"].get<std::string>());
  }
  if (j.contains("n_grid")) c.n_grid = j["n_grid"].get<std::vector<Index>>();
  if (j.contains("alpha_grid"))
    c.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
  if (j.contains("sigma_grid"))
    c.sigma_grid = j["sigma_grid"].get<std::vector<double>>();
  if (j.contains("rs_grid")) {
    for (const auto& pr : j["rs_grid"]) {
      if (!pr.is_array() || pr.size() != 2)
        throw parse_error("experiment config: rs_grid entries must be [R, S]");
      c.rs_grid.emplace_back(pr[0].get<Index>(), pr[1].get<Index>());
    }
  }
  c.r = j.value("r", c.r);
  c.l = j.value("l", c.l);
  c.s = j.value("s", c.s);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  if (j.contains("solver")) c.solver = solver_config_from_json(j["solver"]);
  if (j.contains("method"))
    c.method = solve_method_from_string(j["method"].get<std::string>());
  c.threshold = j.value("threshold", c.threshold);
  c.workers = j.value("workers", c.workers);
  c.pairs = j.value("pairs", c.pairs);
  if (j.contains("p_grid")) c.p_grid = j["p_grid"].get<std::vector<double>>();
  c.dump_trials = j.value("dump_trials", c.dump_trials);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parameter_error("cannot open experiment config: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw parse_error("invalid JSON in " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Graph/basis preparation
// ---------------------------------------------------------------------------

namespace detail {

inline std::shared_ptr<const SpectralBasis> basis_for_graph(const Graph& g,
                                                            GsoKind kind,
                                                            Index l) {
  return std::make_shared<SpectralBasis>(decompose(gso_from_graph(g, kind), l));
}

inline bool basis_usable(const SpectralBasis& b, bool need_distinct) {
  return b.tap_transform_invertible && (!need_distinct || b.distinct_eigvals);
}

/// ER basis with redraws until the spectrum is usable (distinct eigenvalues
/// keep the Vandermonde tap basis well conditioned).
inline std::shared_ptr<const SpectralBasis> er_basis(Index n, double p, Index l,
                                                     GsoKind kind,
                                                     std::uint64_t seed,
                                                     bool need_distinct = true) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const Graph g = erdos_renyi(n, p, derive_seed(seed, attempt));
    auto b = basis_for_graph(g, kind, l);
    if (basis_usable(*b, need_distinct)) return b;
  }
  throw numeric_error("er_basis: no usable spectrum in 64 redraws");
}

inline std::pair<std::shared_ptr<const SpectralBasis>,
                 std::shared_ptr<const SpectralBasis>>
ba_pair_bases(Index n, double alpha, Index l, GsoKind kind,
              std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const auto [g1, g2] = barabasi_albert_pair(n, alpha, derive_seed(seed, attempt));
    auto b1 = basis_for_graph(g1, kind, l);
    if (!basis_usable(*b1, false)) continue;
    auto b2 = basis_for_graph(g2, kind, l);
    if (!basis_usable(*b2, false)) continue;
    return {b1, b2};
  }
  throw numeric_error("ba_pair_bases: no usable spectra in 64 redraws");
}

}  // namespace detail

/// Zachary's karate-club network as bundled edge data.
inline Graph karate_graph() {
  Graph g;
  g.n = datasets::karate_nodes;
  g.directed = false;
  for (const auto& [i, j] : datasets::karate_edges)
    g.edges.push_back({i, j, 1.0});
  return g;
}

inline Graph graph_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parameter_error("cannot open graph file: " + path);
  return load_edge_list(in);
}

namespace detail {

inline LiftedSolution solve_multi(const DemixProblem& p, const SolverConfig& c,
                                  SolveMethod m) {
  switch (m) {
    case SolveMethod::convex: return solve_convex(p, c);
    case SolveMethod::nuclear_only: return solve_nuclear_only(p, c);
    case SolveMethod::logdet: return solve_logdet(p, c);
  }
  throw parameter_error("solve_multi: unknown method");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace detail {

struct GridTask {
  std::map<std::string, double> point;
  std::uint64_t grid_seed = 0;
  /// (per-trial seed, trial index) -> outcome; must be thread-safe.
  std::function<TrialRecord(std::uint64_t, Index)> run;
};

inline void validate_experiment_config(const ExperimentConfig& c) {
  if (c.trials < 1) throw parameter_error("experiment: trials must be >= 1");
  if (c.threshold <= 0)
    throw parameter_error("experiment: threshold must be > 0");
  if (c.workers < 1) throw parameter_error("experiment: workers must be >= 1");
  if (c.r < 1 || c.l < 1 || c.s < 1)
    throw parameter_error("experiment: r, l, s must be >= 1");
  if (c.noise_sigma < 0)
    throw parameter_error("experiment: noise_sigma must be >= 0");
  switch (c.kind) {
    case ExperimentKind::similarity_sweep:
      if (c.alpha_grid.empty())
        throw parameter_error("similarity_sweep: alpha_grid must be non-empty");
      for (double a : c.alpha_grid)
        if (a < 0 || a > 1)
          throw parameter_error("similarity_sweep: alpha must be in [0, 1]");
      break;
    case ExperimentKind::noise_sweep:
      if (c.sigma_grid.empty())
        throw parameter_error("noise_sweep: sigma_grid must be non-empty");
      for (double s : c.sigma_grid)
        if (s < 0)
          throw parameter_error("noise_sweep: sigma must be >= 0");
      break;
    case ExperimentKind::predictor_study:
      if (c.pairs < 2)
        throw parameter_error("predictor_study: need at least 2 graph pairs");
      break;
    default:
      break;
  }
  const auto& gen = c.graph.generator;
  if (gen != "er" && gen != "ba_pair" && gen != "karate" && gen != "file")
    throw parameter_error("experiment: unknown graph generator: " + gen);
  if (gen == "file" && c.graph.files.empty())
    throw parameter_error("experiment: generator=file needs graph.files");
}

/// Fixed bases for kinds that hold the graph constant across trials.
inline BasisList fixed_bases(const ExperimentConfig& c, Index count) {
  BasisList out;
  if (c.graph.generator == "karate") {
    auto b = basis_for_graph(karate_graph(), c.graph.gso, c.l);
    if (!b->tap_transform_invertible)
      throw numeric_error("experiment: karate tap basis is singular");
    out.assign(static_cast<std::size_t>(count), b);
  } else if (c.graph.generator == "file") {
    if (static_cast<Index>(c.graph.files.size()) == 1 && count > 1) {
      auto b = basis_for_graph(graph_from_file(c.graph.files.front()),
                               c.graph.gso, c.l);
      out.assign(static_cast<std::size_t>(count), b);
    } else {
      if (static_cast<Index>(c.graph.files.size()) != count)
        throw parameter_error(
            "experiment: graph.files count must be 1 or match the source count");
      for (const auto& f : c.graph.files)
        out.push_back(basis_for_graph(graph_from_file(f), c.graph.gso, c.l));
    }
  } else if (c.graph.generator == "er") {
    for (Index i = 0; i < count; ++i)
      out.push_back(er_basis(c.graph.n, c.graph.p, c.l, c.graph.gso,
                             derive_seed(c.seed, 0x6669786564ULL + static_cast<std::uint64_t>(i)),
                             false));
  } else {
    throw parameter_error("experiment: generator '" + c.graph.generator +
                          "' cannot produce a fixed graph set");
  }
  return out;
}

/// Noise-sweep rows share planted instances: signals, supports, taps and the
/// unscaled noise direction depend only on the trial index, so a row differs
/// from its neighbors by the noise scale alone.
inline std::vector<GridTask> build_noise_tasks(
    const ExperimentConfig& cfg, const BasisList& bases,
    const std::function<std::uint64_t(std::size_t)>& grid_seed) {
  bool shared = bases.size() >= 2;
  for (const auto& b : bases) shared = shared && (b == bases.front());
  std::vector<GridTask> tasks;
  for (double sigma : cfg.sigma_grid) {
    GridTask t;
    t.point = {{"sigma", sigma}};
    t.grid_seed = grid_seed(tasks.size());
    t.run = [cfg, bases, sigma, shared](std::uint64_t ts, Index trial) {
      const std::uint64_t inst = derive_seed(
          derive_seed(cfg.seed, 0x70616972ULL), static_cast<std::uint64_t>(trial));
      const Index r = static_cast<Index>(bases.size());
      GroundTruth gt = plant_ground_truth(
          bases, std::vector<Index>(static_cast<std::size_t>(r), cfg.s), inst,
          shared ? Orthogonality::prop1 : Orthogonality::none);
      DemixProblem p =
          synthesize_mixture(bases, gt, sigma, std::nullopt, false, inst);
      LiftedSolution sol;
      double de = 0.0;
      if (shared) {
        SeparationSpec spec{TransformChoice::identity,
                            TransformChoice::identity, r};
        sol = demix_single_graph(p, cfg.solver, spec, cfg.method);
        de = r <= 5 ? demixing_error_best_perm(sol.xs_hat, sol.hs_hat, gt)
                    : demixing_error(sol.xs_hat, sol.hs_hat, gt);
      } else {
        sol = solve_multi(p, cfg.solver, cfg.method);
        de = demixing_error(sol.xs_hat, sol.hs_hat, gt);
      }
      return TrialRecord{ts, de, sol.iterations, sol.converged};
    };
    tasks.push_back(std::move(t));
  }
  return tasks;
}

inline std::vector<GridTask> build_tasks(const ExperimentConfig& cfg) {
  std::vector<GridTask> tasks;
  const std::vector<Index> n_grid =
      cfg.n_grid.empty() ? std::vector<Index>{cfg.graph.n} : cfg.n_grid;
  auto grid_seed = [&](std::size_t idx) {
    return derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
  };

  switch (cfg.kind) {
    case ExperimentKind::single_graph_sweep: {
      const auto rs = cfg.rs_grid.empty()
                          ? std::vector<std::pair<Index, Index>>{{cfg.r, cfg.s}}
                          : cfg.rs_grid;
      for (Index n : n_grid)
        for (const auto& [r, s] : rs) {
          GridTask t;
          t.point = {{"n", double(n)}, {"r", double(r)}, {"s", double(s)}};
          t.grid_seed = grid_seed(tasks.size());
          t.run = [cfg, n, r = r, s = s](std::uint64_t, Index trial) {
            // Trials are paired across the (r, s) grid: the stream depends
            // on (seed, n, trial) only, so trial k sees the same graph under
            // every (r, s) setting at matched n.
            const std::uint64_t ps = derive_seed(
                derive_seed(derive_seed(cfg.seed, 0x70616972ULL),
                            static_cast<std::uint64_t>(n)),
                static_cast<std::uint64_t>(trial));
            auto basis = er_basis(n, cfg.graph.p, cfg.l, cfg.graph.gso,
                                  derive_seed(ps, 0x67ULL), false);
            BasisList bases(static_cast<std::size_t>(r), basis);
            GroundTruth gt =
                plant_ground_truth(bases, std::vector<Index>(r, s), ps,
                                   Orthogonality::prop1);
            DemixProblem p = synthesize_mixture(bases, gt, cfg.noise_sigma,
                                                std::nullopt, false, ps);
            SeparationSpec spec{TransformChoice::identity,
                                TransformChoice::identity, r};
            LiftedSolution sol =
                demix_single_graph(p, cfg.solver, spec, cfg.method);
            const double de =
                r <= 5 ? demixing_error_best_perm(sol.xs_hat, sol.hs_hat, gt)
                       : demixing_error(sol.xs_hat, sol.hs_hat, gt);
            return TrialRecord{ps, de, sol.iterations, sol.converged};
          };
          tasks.push_back(std::move(t));
        }
      break;
    }

    case ExperimentKind::similarity_sweep: {
      for (double alpha : cfg.alpha_grid) {
        GridTask t;
        t.point = {{"alpha", alpha}, {"n", double(cfg.graph.n)}};
        t.grid_seed = grid_seed(tasks.size());
        t.run = [cfg, alpha](std::uint64_t ts, Index) {
          auto [b1, b2] = ba_pair_bases(cfg.graph.n, alpha, cfg.l,
                                        cfg.graph.gso, derive_seed(ts, 0x62ULL));
          BasisList bases{b1, b2};
          GroundTruth gt = plant_ground_truth(bases, {cfg.s, cfg.s}, ts);
          DemixProblem p = synthesize_mixture(bases, gt, cfg.noise_sigma,
                                              std::nullopt, false, ts);
          LiftedSolution sol = solve_multi(p, cfg.solver, cfg.method);
          const double de = demixing_error(sol.xs_hat, sol.hs_hat, gt);
          return TrialRecord{ts, de, sol.iterations, sol.converged};
        };
        tasks.push_back(std::move(t));
      }
      break;
    }

    case ExperimentKind::multi_graph: {
      const bool generated = cfg.graph.generator == "er";
      BasisList fixed;
      if (!generated) fixed = fixed_bases(cfg, cfg.r);
      for (Index n : n_grid) {
        GridTask t;
        t.point = {{"n", double(n)}, {"r", double(cfg.r)}};
        t.grid_seed = grid_seed(tasks.size());
        t.run = [cfg, n, generated, fixed](std::uint64_t ts, Index) {
          BasisList bases;
          if (generated) {
            for (Index i = 0; i < cfg.r; ++i)
              bases.push_back(er_basis(
                  n, cfg.graph.p, cfg.l, cfg.graph.gso,
                  derive_seed(ts, 0x67ULL + static_cast<std::uint64_t>(i)),
                  false));
          } else {
            bases = fixed;
          }
          GroundTruth gt = plant_ground_truth(
              bases, std::vector<Index>(static_cast<std::size_t>(cfg.r), cfg.s),
              ts);
          DemixProblem p = synthesize_mixture(bases, gt, cfg.noise_sigma,
                                              std::nullopt, false, ts);
          LiftedSolution sol = solve_multi(p, cfg.solver, cfg.method);
          const double de = demixing_error(sol.xs_hat, sol.hs_hat, gt);
          return TrialRecord{ts, de, sol.iterations, sol.converged};
        };
        tasks.push_back(std::move(t));
      }
      break;
    }

    case ExperimentKind::noise_sweep: {
      // One fixed graph; the planted instance and the noise direction are
      // derived from the trial index alone, so rows are paired and differ
      // only by the noise scale.
      ExperimentConfig kc = cfg;
      if (kc.graph.generator == "ba_pair")
        throw parameter_error("noise_sweep: ba_pair generator not supported");
      if (kc.graph.generator == "er") {
        // A single shared graph: all sources diffuse on it.
        auto b = er_basis(kc.graph.n, kc.graph.p, kc.l, kc.graph.gso,
                          derive_seed(kc.seed, 0x6669786564ULL), false);
        BasisList one(static_cast<std::size_t>(kc.r), b);
        return build_noise_tasks(cfg, one, grid_seed);
      }
      return build_noise_tasks(cfg, fixed_bases(kc, kc.r), grid_seed);
    }

    case ExperimentKind::predictor_study: {
      const std::vector<double> ps =
          cfg.p_grid.empty() ? std::vector<double>{0.06, 0.08, 0.10, 0.14, 0.20}
                             : cfg.p_grid;
      for (Index pair = 0; pair < cfg.pairs; ++pair) {
        const double p = ps[static_cast<std::size_t>(pair) % ps.size()];
        const std::uint64_t gs = grid_seed(tasks.size());
        auto b1 = er_basis(cfg.graph.n, p, cfg.l, cfg.graph.gso,
                           derive_seed(gs, 0x67ULL), true);
        auto b2 = er_basis(cfg.graph.n, p, cfg.l, cfg.graph.gso,
                           derive_seed(gs, 0x68ULL), true);
        const double rho_bar =
            predictor_rho_bar(*b1, *b2, cfg.s, cfg.s, cfg.l, cfg.l);
        GridTask t;
        t.point = {{"pair", double(pair)}, {"p", p}, {"rho_bar", rho_bar}};
        t.grid_seed = gs;
        t.run = [cfg, b1, b2](std::uint64_t ts, Index) {
          BasisList bases{b1, b2};
          GroundTruth gt = plant_ground_truth(bases, {cfg.s, cfg.s}, ts);
          DemixProblem p = synthesize_mixture(bases, gt, cfg.noise_sigma,
                                              std::nullopt, false, ts);
          LiftedSolution sol = solve_multi(p, cfg.solver, cfg.method);
          const double de = demixing_error(sol.xs_hat, sol.hs_hat, gt);
          return TrialRecord{ts, de, sol.iterations, sol.converged};
        };
        tasks.push_back(std::move(t));
      }
      break;
    }
  }
  return tasks;
}

}  // namespace detail

inline ResultsTable run_experiment(const ExperimentConfig& cfg) {
  detail::validate_experiment_config(cfg);
  std::vector<detail::GridTask> tasks = detail::build_tasks(cfg);

  struct Slot {
    std::size_t task;
    Index trial;
  };
  std::vector<Slot> slots;
  slots.reserve(tasks.size() * static_cast<std::size_t>(cfg.trials));
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (Index k = 0; k < cfg.trials; ++k) slots.push_back({t, k});

  std::vector<TrialRecord> records(slots.size());
  std::vector<double> seconds(slots.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= slots.size()) return;
      const Slot& sl = slots[i];
      const detail::GridTask& tk = tasks[sl.task];
      const std::uint64_t ts =
          derive_seed(tk.grid_seed, static_cast<std::uint64_t>(sl.trial));
      const auto t0 = std::chrono::steady_clock::now();
      try {
        records[i] = tk.run(ts, sl.trial);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      seconds[i] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
    }
  };

  const int n_workers = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(std::max(1, cfg.workers)), slots.size()));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ResultsTable table;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    ResultRow row;
    row.grid = tasks[t].point;
    row.trials = cfg.trials;
    std::vector<double> des;
    double iter_sum = 0.0;
    Index succ = 0;
    for (Index k = 0; k < cfg.trials; ++k) {
      const std::size_t i =
          t * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(k);
      const TrialRecord& rec = records[i];
      des.push_back(rec.de);
      iter_sum += static_cast<double>(rec.iterations);
      if (rec.de < cfg.threshold) ++succ;
      row.wall_time += seconds[i];
      row.trial_records.push_back(rec);
    }
    row.success_rate = static_cast<double>(succ) / static_cast<double>(cfg.trials);
    row.median_de = median(des);
    row.mean_iterations = iter_sum / static_cast<double>(cfg.trials);
    table.rows.push_back(std::move(row));
  }

  table.metadata = Json{
      {"config", experiment_config_to_json(cfg)},
      {"version", GRAPHDEMIX_VERSION},
      {"master_seed", cfg.seed},
      {"seed_mixer",
       "splitmix64 finalizer: trial_seed = mix(mix(master ^ mix(grid_index)) "
       "^ mix(trial_index))"},
      {"dump_trials", cfg.dump_trials},
  };
  return table;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string format_sig17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

/// RFC 4180: quote fields containing commas, quotes, or line breaks; double
/// embedded quotes.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::vector<std::string> grid_keys(const ResultsTable& t) {
  if (t.rows.empty()) return {};
  std::vector<std::string> keys;
  for (const auto& [k, v] : t.rows.front().grid) keys.push_back(k);
  for (const auto& row : t.rows) {
    if (row.grid.size() != keys.size())
      throw parameter_error("emit_results: rows disagree on grid keys");
    std::size_t i = 0;
    for (const auto& [k, v] : row.grid)
      if (k != keys[i++])
        throw parameter_error("emit_results: rows disagree on grid keys");
  }
  return keys;
}

}  // namespace detail

enum class EmitFormat { csv, json };

inline Json results_to_json(const ResultsTable& t, bool include_timing = true) {
  Json j;
  j["metadata"] = t.metadata;
  j["rows"] = Json::array();
  const bool dump = t.metadata.value("dump_trials", false);
  for (const auto& row : t.rows) {
    Json r;
    r["grid"] = row.grid;
    r["trials"] = row.trials;
    r["success_rate"] = row.success_rate;
    r["median_de"] = row.median_de;
    r["mean_iterations"] = row.mean_iterations;
    if (include_timing) r["wall_time"] = row.wall_time;
    if (dump) {
      Json seeds = Json::array(), des = Json::array(), iters = Json::array(),
           conv = Json::array();
      for (const auto& rec : row.trial_records) {
        seeds.push_back(rec.seed);
        des.push_back(rec.de);
        iters.push_back(rec.iterations);
        conv.push_back(rec.converged);
      }
      r["trial_seeds"] = seeds;
      r["trial_des"] = des;
      r["trial_iterations"] = iters;
      r["trial_converged"] = conv;
    }
    j["rows"].push_back(std::move(r));
  }
  return j;
}

inline void emit_results(const ResultsTable& t, EmitFormat format,
                         std::ostream& os) {
  if (format == EmitFormat::json) {
    os << results_to_json(t).dump(2) << "\n";
    if (!os) throw numeric_error("emit_results: stream write failed");
    return;
  }
  const std::vector<std::string> keys = detail::grid_keys(t);
  bool first = true;
  for (const auto& k : keys) {
    if (!first) os << ",";
    os << detail::csv_field(k);
    first = false;
  }
  for (const char* m :
       {"trials", "success_rate", "median_de", "mean_iterations", "wall_time"}) {
    if (!first) os << ",";
    os << m;
    first = false;
  }
  os << "\n";
  for (const auto& row : t.rows) {
    bool f2 = true;
    for (const auto& [k, v] : row.grid) {
      if (!f2) os << ",";
      os << detail::csv_field(format_sig17(v));
      f2 = false;
    }
    os << "," << row.trials << "," << format_sig17(row.success_rate) << ","
       << format_sig17(row.median_de) << ","
       << format_sig17(row.mean_iterations) << ","
       << format_sig17(row.wall_time) << "\n";
  }
  if (!os) throw numeric_error("emit_results: stream write failed");
}

/// Per-trial flat CSV (one line per trial) so aggregates can be recomputed.
inline void emit_trials_csv(const ResultsTable& t, std::ostream& os) {
  const std::vector<std::string> keys = detail::grid_keys(t);
  for (const auto& k : keys) os << detail::csv_field(k) << ",";
  os << "trial,seed,de,iterations,converged\n";
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.trial_records.size(); ++k) {
      const TrialRecord& rec = row.trial_records[k];
      for (const auto& [key, v] : row.grid)
        os << detail::csv_field(format_sig17(v)) << ",";
      os << k << "," << rec.seed << "," << format_sig17(rec.de) << ","
         << rec.iterations << "," << (rec.converged ? 1 : 0) << "\n";
    }
  }
  if (!os) throw numeric_error("emit_trials_csv: stream write failed");
}

}  // namespace graphdemix
