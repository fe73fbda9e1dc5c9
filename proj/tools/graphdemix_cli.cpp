// Command-line front end: graph generation, single-instance demixing,
// experiment sweeps, and recovery-theory diagnostics.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphdemix/graphdemix.hpp"

namespace gd = graphdemix;
using gd::Index;
using Json = nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw gd::parameter_error("cannot open output file: " + path);
  return os;
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw gd::parameter_error("cannot open file: " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw gd::parse_error("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json(const Json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    auto os = open_out(path);
    os << j.dump(2) << "\n";
  }
}

// --------------------------------------------------------------------------
// generate
// --------------------------------------------------------------------------

struct GenerateOpts {
  std::string kind = "er";
  Index n = 50;
  double p = 0.15;
  double alpha = 0.5;
  std::uint64_t seed = 1;
  std::string out;
  std::string out2;
};

int run_generate(const GenerateOpts& o) {
  if (o.kind == "er") {
    const gd::Graph g = gd::erdos_renyi(o.n, o.p, o.seed);
    auto os = open_out(o.out);
    gd::write_edge_list(g, os);
    std::cerr << "wrote " << o.out << ": " << g.n << " nodes, "
              << g.edge_count() << " edges\n";
  } else if (o.kind == "ba_pair") {
    if (o.out2.empty())
      throw gd::parameter_error("generate: ba_pair needs --out2");
    const auto [g1, g2] = gd::barabasi_albert_pair(o.n, o.alpha, o.seed);
    auto os1 = open_out(o.out);
    gd::write_edge_list(g1, os1);
    auto os2 = open_out(o.out2);
    gd::write_edge_list(g2, os2);
    std::cerr << "wrote " << o.out << " and " << o.out2 << ": " << o.n
              << " nodes, edge overlap " << gd::edge_overlap(g1, g2) << "\n";
  } else if (o.kind == "karate") {
    const gd::Graph g = gd::karate_graph();
    auto os = open_out(o.out);
    gd::write_edge_list(g, os);
    std::cerr << "wrote " << o.out << ": " << g.n << " nodes, "
              << g.edge_count() << " edges\n";
  } else {
    throw gd::parameter_error("generate: unknown --kind '" + o.kind +
                              "' (er, ba_pair, karate)");
  }
  return 0;
}

// --------------------------------------------------------------------------
// demix
// --------------------------------------------------------------------------

struct DemixOpts {
  std::string config;
  std::string out;
  double threshold = 1e-3;
};

int run_demix(const DemixOpts& o) {
  const Json doc = read_json_file(o.config);

  gd::DemixProblem problem = [&] {
    if (doc.contains("problem")) return gd::problem_from_json(doc["problem"]);
    if (doc.contains("problem_file"))
      return gd::problem_from_json(
          read_json_file(doc["problem_file"].get<std::string>()));
    throw gd::parse_error("demix config: need 'problem' or 'problem_file'");
  }();

  std::optional<gd::GroundTruth> truth;
  if (doc.contains("truth"))
    truth = gd::ground_truth_from_json(doc["truth"]);
  else if (doc.contains("truth_file"))
    truth = gd::ground_truth_from_json(
        read_json_file(doc["truth_file"].get<std::string>()));

  gd::SolverConfig solver;
  if (doc.contains("solver")) {
    // Merge user keys over defaults so partial solver blocks are accepted.
    Json merged = gd::solver_config_to_json(gd::SolverConfig{});
    merged.update(doc["solver"]);
    solver = gd::solver_config_from_json(merged);
  }
  const gd::SolveMethod method = gd::solve_method_from_string(
      doc.value("method", std::string("logdet")));

  gd::LiftedSolution sol;
  bool used_single_graph = false;
  if (doc.contains("single_graph")) {
    const Json& sg = doc["single_graph"];
    gd::SeparationSpec spec;
    const auto tx = sg.value("transform_x", std::string("identity"));
    const auto th = sg.value("transform_h", std::string("identity"));
    auto parse_tx = [](const std::string& s) {
      if (s == "identity") return gd::TransformChoice::identity;
      if (s == "gft") return gd::TransformChoice::gft;
      throw gd::parse_error("single_graph: unknown transform '" + s + "'");
    };
    spec.tx = parse_tx(tx);
    spec.th = parse_tx(th);
    spec.r = sg.value("rank", problem.r());
    sol = gd::demix_single_graph(problem, solver, spec, method);
    used_single_graph = true;
  } else {
    switch (method) {
      case gd::SolveMethod::convex: sol = gd::solve_convex(problem, solver); break;
      case gd::SolveMethod::nuclear_only:
        sol = gd::solve_nuclear_only(problem, solver);
        break;
      case gd::SolveMethod::logdet: sol = gd::solve_logdet(problem, solver); break;
    }
  }

  Json result;
  result["diagnostics"] = gd::diagnostics_to_json(sol);
  result["method"] = gd::to_string(method);
  result["single_graph_pipeline"] = used_single_graph;
  Json xs = Json::array();
  Json hs = Json::array();
  for (const auto& x : sol.xs_hat) xs.push_back(gd::cvec_to_json(x));
  for (const auto& h : sol.hs_hat) hs.push_back(gd::cvec_to_json(h));
  result["xs_hat"] = xs;
  result["hs_hat"] = hs;
  if (truth) {
    const bool permute = (used_single_graph || problem.single_graph()) &&
                         problem.r() <= 5;
    const double de =
        permute ? gd::demixing_error_best_perm(sol.xs_hat, sol.hs_hat, *truth)
                : gd::demixing_error(sol.xs_hat, sol.hs_hat, *truth);
    result["demixing_error"] = de;
    result["success"] = gd::success(de, o.threshold);
    result["threshold"] = o.threshold;
  }
  write_json(result, o.out);
  return 0;
}

// --------------------------------------------------------------------------
// experiment
// --------------------------------------------------------------------------

struct ExperimentOpts {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::string dump_trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int run_experiment_cmd(const ExperimentOpts& o) {
  gd::ExperimentConfig cfg = gd::load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.dump_trials.empty()) cfg.dump_trials = true;

  gd::EmitFormat fmt;
  if (o.format == "csv") {
    fmt = gd::EmitFormat::csv;
  } else if (o.format == "json") {
    fmt = gd::EmitFormat::json;
  } else {
    throw gd::parameter_error("experiment: unknown --format '" + o.format +
                              "' (csv, json)");
  }

  const gd::ResultsTable table = gd::run_experiment(cfg);
  if (o.out.empty()) {
    gd::emit_results(table, fmt, std::cout);
  } else {
    auto os = open_out(o.out);
    gd::emit_results(table, fmt, os);
    std::cerr << "wrote " << o.out << " (" << table.rows.size() << " rows)\n";
  }
  if (!o.dump_trials.empty()) {
    auto os = open_out(o.dump_trials);
    gd::emit_trials_csv(table, os);
    std::cerr << "wrote " << o.dump_trials << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------------
// theory
// --------------------------------------------------------------------------

struct TheoryOpts {
  std::vector<std::string> graphs;
  std::vector<Index> ss;
  Index l = 2;
  std::string gso = "adjacency";
  std::uint64_t taps_seed = 1;
  double constant_c = 1.0;
  std::string out;
};

int run_theory(const TheoryOpts& o) {
  if (o.graphs.empty())
    throw gd::parameter_error("theory: need at least one --graphs file");
  const Index r = static_cast<Index>(o.graphs.size());
  std::vector<Index> ss = o.ss;
  if (ss.empty()) ss.assign(static_cast<std::size_t>(r), 1);
  if (static_cast<Index>(ss.size()) == 1 && r > 1)
    ss.assign(static_cast<std::size_t>(r), ss[0]);
  if (static_cast<Index>(ss.size()) != r)
    throw gd::parameter_error("theory: --s needs one value or one per graph");

  const gd::GsoKind kind = gd::gso_kind_from_string(o.gso);
  gd::BasisList bases;
  for (const auto& path : o.graphs) {
    const gd::Graph g = gd::graph_from_file(path);
    bases.push_back(std::make_shared<const gd::SpectralBasis>(
        gd::decompose(gd::gso_from_graph(g, kind), o.l)));
  }
  const Index n = bases.front()->n;
  for (const auto& b : bases)
    if (b->n != n)
      throw gd::parameter_error("theory: graphs must have equal node counts");

  // Filter taps are not part of the inputs; draw unit-normal taps in the
  // orthonormal coordinates from --taps-seed so results are reproducible.
  std::vector<gd::RVec> hs;
  for (Index i = 0; i < r; ++i) {
    auto rng = gd::make_rng(
        gd::derive_seed(o.taps_seed, static_cast<std::uint64_t>(i)));
    const gd::RVec hp = gd::gaussian_vector(o.l, rng);
    const gd::CVec raw =
        bases[static_cast<std::size_t>(i)]->to_raw_taps(gd::to_complex(hp));
    hs.push_back(raw.real());
  }

  const gd::ConcentrationParams cp = gd::concentration_params(bases, hs, ss);
  std::vector<Index> ls(static_cast<std::size_t>(r), o.l);
  const gd::RecoveryBounds rb =
      gd::alpha_bounds(cp, n, r, ls, ss, o.constant_c);

  Json j;
  j["n"] = n;
  j["r"] = r;
  j["l"] = o.l;
  j["s"] = ss;
  j["taps_seed"] = o.taps_seed;
  j["rho_u"] = cp.rho_u;
  j["rho_psi"] = cp.rho_psi;
  Json ku = Json::array();
  Json kp = Json::array();
  Json rbar = Json::array();
  for (Index a = 0; a < r; ++a) {
    Json rowu = Json::array();
    Json rowp = Json::array();
    Json rowr = Json::array();
    for (Index b = 0; b < r; ++b) {
      rowu.push_back(cp.kappa_u(a, b));
      rowp.push_back(cp.kappa_psi(a, b));
      rowr.push_back(gd::predictor_rho_bar(
          *bases[static_cast<std::size_t>(a)],
          *bases[static_cast<std::size_t>(b)], ss[static_cast<std::size_t>(a)],
          ss[static_cast<std::size_t>(b)], o.l, o.l));
    }
    ku.push_back(rowu);
    kp.push_back(rowp);
    rbar.push_back(rowr);
  }
  j["kappa_u"] = ku;
  j["kappa_psi"] = kp;
  j["rho_bar"] = rbar;
  j["mu_h"] = cp.mu_h;
  j["mu_max"] = cp.mu_max;
  j["alpha1"] = rb.alpha1;
  j["alpha2"] = rb.alpha2;
  j["alpha3"] = rb.alpha3;
  j["alpha"] = rb.alpha;
  j["vacuous"] = rb.vacuous;
  j["constant_c"] = rb.constant_c;
  if (rb.probability) j["probability"] = *rb.probability;
  write_json(j, o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphdemix: blind demixing of diffused sparse graph signals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GRAPHDEMIX_VERSION);

  GenerateOpts gen;
  auto* cmd_gen = app.add_subcommand(
      "generate", "Generate graphs and write them as edge lists");
  cmd_gen->add_option("--kind", gen.kind, "er, ba_pair, or karate")
      ->capture_default_str();
  cmd_gen->add_option("--n", gen.n, "node count")->capture_default_str();
  cmd_gen->add_option("--p", gen.p, "edge probability (er)")
      ->capture_default_str();
  cmd_gen->add_option("--alpha", gen.alpha, "edge-overlap level (ba_pair)")
      ->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "output edge-list path")->required();
  cmd_gen->add_option("--out2", gen.out2, "second output path (ba_pair)");

  DemixOpts dem;
  auto* cmd_dem = app.add_subcommand(
      "demix", "Solve one demixing instance described by a JSON config");
  cmd_dem->add_option("--config", dem.config, "instance config JSON")
      ->required();
  cmd_dem->add_option("--out", dem.out, "write result JSON here (default stdout)");
  cmd_dem->add_option("--threshold", dem.threshold,
                      "success threshold on the demixing error")
      ->capture_default_str();

  ExperimentOpts exp;
  auto* cmd_exp = app.add_subcommand(
      "experiment", "Run a configured experiment sweep and emit a results table");
  cmd_exp->add_option("--config", exp.config, "experiment config JSON")
      ->required();
  cmd_exp->add_option("--out", exp.out, "output path (default stdout)");
  cmd_exp->add_option("--format", exp.format, "csv or json")
      ->capture_default_str();
  cmd_exp->add_option("--seed", exp.seed, "override the config seed");
  cmd_exp->add_option("--workers", exp.workers, "override worker thread count");
  cmd_exp->add_option("--dump-trials", exp.dump_trials,
                      "also write a per-trial CSV to this path");

  TheoryOpts theo;
  auto* cmd_theo = app.add_subcommand(
      "theory", "Compute recovery-theory diagnostics for graphs on disk");
  cmd_theo->add_option("--graphs", theo.graphs, "edge-list files, one per source")
      ->required()
      ->expected(-1);
  cmd_theo->add_option("--s", theo.ss,
                       "sparsity per source (one value or one per graph)");
  cmd_theo->add_option("--l", theo.l, "filter length")->capture_default_str();
  cmd_theo->add_option("--gso", theo.gso, "adjacency or laplacian")
      ->capture_default_str();
  cmd_theo->add_option("--taps-seed", theo.taps_seed,
                       "seed for the reference filter taps")
      ->capture_default_str();
  cmd_theo->add_option("--constant-c", theo.constant_c,
                       "unspecified constant in the third exponent")
      ->capture_default_str();
  cmd_theo->add_option("--out", theo.out, "write JSON here (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help / --version land here; CLI11 prints through exit().
      return app.exit(e);
    }
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_gen)) return run_generate(gen);
    if (app.got_subcommand(cmd_dem)) return run_demix(dem);
    if (app.got_subcommand(cmd_exp)) return run_experiment_cmd(exp);
    if (app.got_subcommand(cmd_theo)) return run_theory(theo);
    std::cerr << app.help() << "\n";
    return 1;
  } catch (const gd::parameter_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gd::parse_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gd::model_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
