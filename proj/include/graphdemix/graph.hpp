#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphdemix/core.hpp"
#include "graphdemix/random.hpp"

namespace graphdemix {

struct Edge {
  Index i = 0;
  Index j = 0;
  double w = 1.0;
};

/// Simple graph (no self-loops, no duplicate edges).  Undirected edges are
/// stored once in canonical (i < j) order; directed edges as ordered pairs.
struct Graph {
  Index n = 0;
  bool directed = false;
  std::vector<Edge> edges;

  Index edge_count() const { return static_cast<Index>(edges.size()); }

  /// Pattern-only edge set in canonical order (used for overlap and lookups).
  std::set<std::pair<Index, Index>> edge_set() const {
    std::set<std::pair<Index, Index>> s;
    for (const auto& e : edges) s.insert(canonical(e.i, e.j));
    return s;
  }

  std::pair<Index, Index> canonical(Index i, Index j) const {
    if (!directed && i > j) std::swap(i, j);
    return {i, j};
  }

  bool has_edge(Index i, Index j) const {
    const auto key = canonical(i, j);
    for (const auto& e : edges)
      if (canonical(e.i, e.j) == key) return true;
    return false;
  }
};

namespace detail {

/// Validates and appends one edge; `where` names the source for error text.
inline void add_edge_checked(Graph& g, Index i, Index j, double w,
                             const std::string& where) {
  if (i < 0 || j < 0 || i >= g.n || j >= g.n)
    throw parse_error(where + ": edge endpoint out of range [0, " +
                      std::to_string(g.n) + "): " + std::to_string(i) + "," +
                      std::to_string(j));
  if (i == j) throw parse_error(where + ": self-loop not permitted");
  if (!std::isfinite(w) || w == 0.0)
    throw parse_error(where + ": edge weight must be finite and nonzero");
  auto key = g.canonical(i, j);
  for (const auto& e : g.edges)
    if (g.canonical(e.i, e.j) == key)
      throw parse_error(where + ": duplicate edge " + std::to_string(i) + "," +
                        std::to_string(j));
  g.edges.push_back({key.first, key.second, w});
}

}  // namespace detail

/// G(n, p): every unordered pair drawn independently with probability p,
/// weight 1.  Same seed, same graph.
inline Graph erdos_renyi(Index n, double p, std::uint64_t seed) {
  if (n < 1) throw parameter_error("erdos_renyi: need n >= 1");
  if (!(p >= 0.0 && p <= 1.0))
    throw parameter_error("erdos_renyi: p must lie in [0,1]");
  Graph g;
  g.n = n;
  g.directed = false;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (coin(rng) < p) g.edges.push_back({i, j, 1.0});
  return g;
}

namespace detail {

/// Samples a node with probability proportional to degree + 1.  The +1
/// smoothing keeps isolated seed-graph nodes reachable as attachment targets.
inline Index preferential_pick(const std::vector<Index>& degree, Index limit,
                               std::mt19937_64& rng) {
  Index total = limit;  // sum of (+1) terms
  for (Index v = 0; v < limit; ++v) total += degree[v];
  std::uniform_int_distribution<Index> dist(0, total - 1);
  Index t = dist(rng);
  for (Index v = 0; v < limit; ++v) {
    const Index wv = degree[v] + 1;
    if (t < wv) return v;
    t -= wv;
  }
  return limit - 1;  // unreachable
}

/// Scale-free graph: Erdos-Renyi seed on n/10 nodes (p = 0.1), then growth by
/// preferential attachment, m = 2 edges per new node.
inline Graph barabasi_albert(Index n, std::uint64_t seed) {
  if (n < 10) throw parameter_error("barabasi_albert: need n >= 10");
  const Index n0 = n / 10;
  Graph g;
  g.n = n;
  g.directed = false;
  auto rng = make_rng(derive_seed(seed, 0x6261u));  // growth stream
  {
    const Graph core = erdos_renyi(n0, 0.1, derive_seed(seed, 0x6572u));
    g.edges = core.edges;
  }
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (const auto& e : g.edges) {
    ++degree[e.i];
    ++degree[e.j];
  }
  const Index m = 2;
  for (Index v = n0; v < n; ++v) {
    const Index want = std::min<Index>(m, v);  // v existing nodes available
    std::vector<Index> targets;
    while (static_cast<Index>(targets.size()) < want) {
      const Index t = preferential_pick(degree, v, rng);
      if (std::find(targets.begin(), targets.end(), t) == targets.end())
        targets.push_back(t);
    }
    for (const Index t : targets) {
      g.edges.push_back({std::min(v, t), std::max(v, t), 1.0});
      ++degree[v];
      ++degree[t];
    }
  }
  return g;
}

}  // namespace detail

/// Two scale-free graphs on n nodes sharing exactly round(alpha*|E1|) edges.
/// G1 grows normally; G2 keeps a uniform sample of G1's edges and refills the
/// remainder by degree-preferential edge insertion that avoids G1, so the
/// overlap knob is exact up to rounding.
inline std::pair<Graph, Graph> barabasi_albert_pair(Index n, double alpha,
                                                    std::uint64_t seed) {
  if (n < 10) throw parameter_error("barabasi_albert_pair: need n >= 10");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw parameter_error("barabasi_albert_pair: overlap must lie in [0,1]");
  Graph g1 = detail::barabasi_albert(n, derive_seed(seed, 0x6731u));
  const Index e_total = g1.edge_count();
  const Index keep =
      static_cast<Index>(std::llround(alpha * static_cast<double>(e_total)));

  Graph g2;
  g2.n = n;
  g2.directed = false;
  auto rng = make_rng(derive_seed(seed, 0x6732u));
  const auto kept_idx = sample_without_replacement(e_total, keep, rng);
  for (const Index k : kept_idx) g2.edges.push_back(g1.edges[k]);

  const auto forbidden = g1.edge_set();
  auto taken = g2.edge_set();
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (const auto& e : g2.edges) {
    ++degree[e.i];
    ++degree[e.j];
  }
  std::uniform_int_distribution<Index> any_node(0, n - 1);
  Index attempts = 0;
  const Index attempt_cap = 1000 * (e_total + 1);
  while (g2.edge_count() < e_total) {
    Index a, b;
    if (attempts < attempt_cap) {
      a = detail::preferential_pick(degree, n, rng);
      b = detail::preferential_pick(degree, n, rng);
    } else {  // pathological density: fall back to uniform pairs
      a = any_node(rng);
      b = any_node(rng);
    }
    ++attempts;
    if (a == b) continue;
    const auto key = g2.canonical(a, b);
    if (forbidden.count(key) || taken.count(key)) continue;
    g2.edges.push_back({key.first, key.second, 1.0});
    taken.insert(key);
    ++degree[a];
    ++degree[b];
  }
  return {std::move(g1), std::move(g2)};
}

/// Parses CSV lines `i,j[,weight]` with optional header
/// `# nodes=N directed=0|1`.  Unheadered node count is 1 + max index.
inline Graph load_edge_list(std::istream& in) {
  struct Row {
    Index i, j;
    double w;
    int line;
  };
  std::vector<Row> rows;
  Index declared_n = -1;
  bool directed = false;
  bool saw_header = false;
  std::string line;
  int lineno = 0;
  Index max_idx = -1;
  while (std::getline(in, line)) {
    ++lineno;
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::string s = line.substr(b, e - b + 1);
    if (s[0] == '#') {
      if (!saw_header) {
        const auto npos = s.find("nodes=");
        if (npos != std::string::npos) {
          try {
            declared_n = std::stoll(s.substr(npos + 6));
          } catch (const std::exception&) {
            throw parse_error("line " + std::to_string(lineno) +
                              ": malformed nodes= header");
          }
          saw_header = true;
        }
        const auto dpos = s.find("directed=");
        if (dpos != std::string::npos) directed = s[dpos + 9] == '1';
      }
      continue;
    }
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream ss(s);
    long long i = 0, j = 0;
    double w = 1.0;
    if (!(ss >> i >> j))
      throw parse_error("line " + std::to_string(lineno) +
                        ": expected `i,j[,weight]`, got \"" + line + "\"");
    if (!(ss >> w)) w = 1.0;
    std::string extra;
    if (ss.clear(), ss >> extra)
      throw parse_error("line " + std::to_string(lineno) +
                        ": trailing fields in \"" + line + "\"");
    if (i < 0 || j < 0)
      throw parse_error("line " + std::to_string(lineno) +
                        ": negative node index");
    rows.push_back({static_cast<Index>(i), static_cast<Index>(j), w, lineno});
    max_idx = std::max<Index>(max_idx, std::max<Index>(i, j));
  }
  Graph g;
  g.n = declared_n >= 0 ? declared_n : max_idx + 1;
  if (g.n < 1 && rows.empty())
    throw parse_error("empty edge list and no `# nodes=` header");
  g.directed = directed;
  for (const auto& r : rows)
    detail::add_edge_checked(g, r.i, r.j, r.w,
                             "line " + std::to_string(r.line));
  return g;
}

inline Graph load_edge_list(const std::string& text) {
  std::istringstream in(text);
  return load_edge_list(in);
}

/// Writes the edge-list CSV format accepted by load_edge_list.
inline void write_edge_list(const Graph& g, std::ostream& out) {
  out << "# nodes=" << g.n << " directed=" << (g.directed ? 1 : 0) << "\n";
  for (const auto& e : g.edges) {
    out << e.i << "," << e.j;
    if (e.w != 1.0) out << "," << e.w;
    out << "\n";
  }
}

enum class GsoKind { adjacency, laplacian, custom };

inline std::string to_string(GsoKind k) {
  switch (k) {
    case GsoKind::adjacency: return "adjacency";
    case GsoKind::laplacian: return "laplacian";
    default: return "custom";
  }
}

/// Graph-shift operator: dense matrix whose sparsity pattern follows the
/// graph, with normality/hermitianity flags computed at construction.
struct Gso {
  CMat matrix;
  GsoKind kind = GsoKind::custom;
  bool normal = false;
  bool hermitian = false;

  Index n() const { return matrix.rows(); }
};

/// Wraps an arbitrary square matrix as a GSO, computing the flags.
inline Gso make_gso(CMat m, GsoKind kind = GsoKind::custom) {
  if (m.rows() != m.cols())
    throw parameter_error("make_gso: matrix must be square");
  Gso s;
  s.matrix = std::move(m);
  s.kind = kind;
  const double scale = s.matrix.squaredNorm();  // ||S||_F^2
  const double comm =
      (s.matrix * s.matrix.adjoint() - s.matrix.adjoint() * s.matrix).norm();
  s.normal = scale == 0.0 || comm / scale <= 1e-10;
  s.hermitian = (s.matrix - s.matrix.adjoint()).cwiseAbs().maxCoeff() <=
                1e-12 * std::max(1.0, s.matrix.cwiseAbs().maxCoeff());
  return s;
}

inline Gso make_gso(const RMat& m, GsoKind kind = GsoKind::custom) {
  return make_gso(to_complex(m), kind);
}

/// Adjacency stores edge (i -> j) at entry (j, i); Laplacian is degree
/// diagonal minus adjacency (undirected graphs only).
inline Gso gso_from_graph(const Graph& g, GsoKind kind) {
  if (kind == GsoKind::custom)
    throw parameter_error("gso_from_graph: kind must be adjacency|laplacian");
  if (kind == GsoKind::laplacian && g.directed)
    throw parameter_error(
        "gso_from_graph: laplacian unsupported for directed graphs");
  RMat a = RMat::Zero(g.n, g.n);
  for (const auto& e : g.edges) {
    a(e.j, e.i) = e.w;
    if (!g.directed) a(e.i, e.j) = e.w;
  }
  if (kind == GsoKind::adjacency) return make_gso(a, kind);
  RMat lap = -a;
  for (Index i = 0; i < g.n; ++i) lap(i, i) = a.row(i).sum();
  return make_gso(lap, kind);
}

/// Pattern-only shared-edge fraction |E1 and E2| / max(|E1|, |E2|).
inline double edge_overlap(const Graph& g1, const Graph& g2) {
  if (g1.n != g2.n)
    throw parameter_error("edge_overlap: node counts differ");
  if (g1.directed != g2.directed)
    throw parameter_error("edge_overlap: directedness differs");
  const auto e1 = g1.edge_set();
  const auto e2 = g2.edge_set();
  if (e1.empty() && e2.empty()) return 1.0;
  if (e1.empty() || e2.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& k : e1) shared += e2.count(k);
  return static_cast<double>(shared) /
         static_cast<double>(std::max(e1.size(), e2.size()));
}

/// Rows of comma-separated reals; all rows must have equal length.
inline RMat load_dense_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    if (line[b] == '#') continue;
    std::string s = line;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream ss(s);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof())
      throw parse_error("line " + std::to_string(lineno) +
                        ": non-numeric field in dense matrix");
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw parse_error("line " + std::to_string(lineno) +
                        ": ragged row in dense matrix");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error("dense matrix input is empty");
  RMat m(static_cast<Index>(rows.size()),
         static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

/// Debug/interchange dump; full double precision.
inline void dump_matrix_csv(const CMat& m, std::ostream& out) {
  out.precision(17);
  const bool real_only = m.size() == 0 || m.imag().cwiseAbs().maxCoeff() == 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      if (real_only)
        out << m(i, j).real();
      else
        out << m(i, j).real() << "+" << m(i, j).imag() << "i";
    }
    out << "\n";
  }
}

}  // namespace graphdemix
