#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "graphdemix/graphdemix.hpp"

namespace gd = graphdemix;
using gd::Index;

TEST_CASE("ER edge probability extremes", "[graph]") {
  const gd::Graph empty = gd::erdos_renyi(12, 0.0, 5);
  CHECK(empty.n == 12);
  CHECK(empty.edge_count() == 0);

  const gd::Graph full = gd::erdos_renyi(12, 1.0, 5);
  CHECK(full.edge_count() == 12 * 11 / 2);
  CHECK_FALSE(full.directed);
}

TEST_CASE("ER graphs are simple, undirected, and deterministic", "[graph]") {
  const gd::Graph a = gd::erdos_renyi(30, 0.2, 42);
  const gd::Graph b = gd::erdos_renyi(30, 0.2, 42);
  const gd::Graph c = gd::erdos_renyi(30, 0.2, 43);
  CHECK(a.edge_set() == b.edge_set());
  CHECK(a.edge_set() != c.edge_set());  // astronomically unlikely to tie
  for (const auto& e : a.edges) {
    CHECK(e.i != e.j);
    CHECK(e.i >= 0);
    CHECK(e.j < 30);
  }
  // no duplicates in either orientation
  CHECK(static_cast<Index>(a.edge_set().size()) == a.edge_count());
}

TEST_CASE("ER rejects bad parameters", "[graph]") {
  CHECK_THROWS_AS(gd::erdos_renyi(0, 0.5, 1), gd::parameter_error);
  CHECK_THROWS_AS(gd::erdos_renyi(5, -0.1, 1), gd::parameter_error);
  CHECK_THROWS_AS(gd::erdos_renyi(5, 1.1, 1), gd::parameter_error);
}

TEST_CASE("preferential-attachment pairs hit the requested overlap", "[graph]") {
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto [g1, g2] = gd::barabasi_albert_pair(60, 1.0, seed);
    CHECK(g1.edge_set() == g2.edge_set());
    CHECK(gd::edge_overlap(g1, g2) == 1.0);
  }
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto [g1, g2] = gd::barabasi_albert_pair(60, 0.0, seed);
    CHECK(g1.edge_count() == g2.edge_count());
    CHECK(gd::edge_overlap(g1, g2) <= 0.1);
  }
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto [g1, g2] = gd::barabasi_albert_pair(60, 0.5, seed);
    const double ov = gd::edge_overlap(g1, g2);
    CHECK(ov >= 0.45);
    CHECK(ov <= 0.65);
  }
}

TEST_CASE("edge overlap on hand-built graphs", "[graph]") {
  gd::Graph g1;
  g1.n = 3;
  g1.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  gd::Graph g2;
  g2.n = 3;
  g2.edges = {{1, 0, 1.0}, {0, 2, 1.0}};  // (1,0) matches (0,1) undirected
  CHECK(gd::edge_overlap(g1, g2) == 0.5);
  CHECK(gd::edge_overlap(g2, g1) == 0.5);

  gd::Graph e1, e2;
  e1.n = e2.n = 4;
  CHECK(gd::edge_overlap(e1, e2) == 1.0);  // both empty: identical
  e1.n = 3;
  CHECK(gd::edge_overlap(e1, g1) == 0.0);  // one empty

  gd::Graph wrong_n;
  wrong_n.n = 5;
  CHECK_THROWS_AS(gd::edge_overlap(g1, wrong_n), gd::parameter_error);
  gd::Graph dir;
  dir.n = 3;
  dir.directed = true;
  CHECK_THROWS_AS(gd::edge_overlap(g1, dir), gd::parameter_error);
}

TEST_CASE("edge-list parsing accepts both delimiters and headers", "[graph]") {
  const gd::Graph g = gd::load_edge_list(
      "# nodes=5 directed=0\n"
      "0,1\n"
      "1 2 2.5\n"
      "\n"
      "  3,4,  0.5\n");
  CHECK(g.n == 5);
  CHECK_FALSE(g.directed);
  REQUIRE(g.edge_count() == 3);
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(2, 1));
  bool found = false;
  for (const auto& e : g.edges)
    if (e.i == 1 && e.j == 2) {
      found = true;
      CHECK(e.w == 2.5);
    }
  CHECK(found);

  const gd::Graph inferred = gd::load_edge_list("0,7\n");
  CHECK(inferred.n == 8);  // max index + 1 without a header
}

TEST_CASE("edge-list parse errors carry line numbers", "[graph]") {
  using Catch::Matchers::ContainsSubstring;
  CHECK_THROWS_WITH(gd::load_edge_list("0,1\nfoo bar\n"),
                    ContainsSubstring("line 2"));
  CHECK_THROWS_AS(gd::load_edge_list("-1,2\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list("0,1,1.0,junk\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list("# nodes=abc\n0,1\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list(""), gd::parse_error);
  // structural violations: self loop, duplicate, zero weight, out of range
  CHECK_THROWS_AS(gd::load_edge_list("0,0\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list("0,1\n1,0\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list("0,1,0.0\n"), gd::parse_error);
  CHECK_THROWS_AS(gd::load_edge_list("# nodes=2\n0,5\n"), gd::parse_error);
}

TEST_CASE("edge lists round-trip through write and load", "[graph]") {
  const gd::Graph g = gd::erdos_renyi(15, 0.3, 9);
  std::ostringstream os;
  gd::write_edge_list(g, os);
  const gd::Graph back = gd::load_edge_list(os.str());
  CHECK(back.n == g.n);
  CHECK(back.directed == g.directed);
  CHECK(back.edge_set() == g.edge_set());
}

TEST_CASE("bundled karate-club graph", "[graph]") {
  const gd::Graph g = gd::karate_graph();
  CHECK(g.n == 34);
  CHECK(g.edge_count() == 78);
  CHECK_FALSE(g.directed);
  CHECK(g.has_edge(0, 1));
  CHECK(static_cast<Index>(g.edge_set().size()) == 78);
}

TEST_CASE("adjacency shift operator mirrors the edge weights", "[graph]") {
  gd::Graph g;
  g.n = 3;
  g.edges = {{0, 1, 2.0}, {1, 2, 3.0}};
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);
  CHECK(s.kind == gd::GsoKind::adjacency);
  CHECK(s.n() == 3);
  CHECK(s.matrix(0, 1) == gd::Complex(2.0, 0.0));
  CHECK(s.matrix(1, 0) == gd::Complex(2.0, 0.0));
  CHECK(s.matrix(2, 1) == gd::Complex(3.0, 0.0));
  CHECK(s.matrix(0, 2) == gd::Complex(0.0, 0.0));
  CHECK(s.hermitian);
  CHECK(s.normal);
}

TEST_CASE("Laplacian rows sum to zero", "[graph]") {
  const gd::Graph g = gd::erdos_renyi(10, 0.4, 3);
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::laplacian);
  for (Index i = 0; i < 10; ++i)
    CHECK(std::abs(s.matrix.row(i).sum()) < 1e-12);
  CHECK(s.hermitian);

  gd::Graph dir;
  dir.n = 2;
  dir.directed = true;
  dir.edges = {{0, 1, 1.0}};
  CHECK_THROWS_AS(gd::gso_from_graph(dir, gd::GsoKind::laplacian),
                  gd::parameter_error);
  CHECK_THROWS_AS(gd::gso_from_graph(g, gd::GsoKind::custom),
                  gd::parameter_error);
}

TEST_CASE("normality detection on custom shift operators", "[graph]") {
  gd::RMat rot = gd::RMat::Zero(3, 3);  // cyclic rotation: normal, not
  rot(0, 1) = rot(1, 2) = rot(2, 0) = 1.0;  // hermitian
  const gd::Gso s1 = gd::make_gso(rot);
  CHECK(s1.normal);
  CHECK_FALSE(s1.hermitian);

  gd::RMat nil = gd::RMat::Zero(2, 2);
  nil(0, 1) = 1.0;  // nilpotent upper shift: not normal
  const gd::Gso s2 = gd::make_gso(nil);
  CHECK_FALSE(s2.normal);

  CHECK_THROWS_AS(gd::make_gso(gd::RMat::Zero(2, 3)), gd::parameter_error);
}

TEST_CASE("dense matrix CSV loading", "[graph]") {
  std::istringstream in("1,2\n3.5, 4\n");
  const gd::RMat m = gd::load_dense_matrix(in);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(1, 0) == 3.5);

  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(gd::load_dense_matrix(ragged), gd::parse_error);
  std::istringstream empty("");
  CHECK_THROWS_AS(gd::load_dense_matrix(empty), gd::parse_error);
}
