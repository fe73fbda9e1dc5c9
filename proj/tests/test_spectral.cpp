#include <catch2/catch_amalgamated.hpp>

#include "graphdemix/graphdemix.hpp"

namespace gd = graphdemix;
using gd::Index;

namespace {

gd::SpectralBasis er_basis_for_test(Index n, double p, Index l,
                                    std::uint64_t seed) {
  const gd::Graph g = gd::erdos_renyi(n, p, seed);
  return gd::decompose(gd::gso_from_graph(g, gd::GsoKind::adjacency), l);
}

}  // namespace

TEST_CASE("decomposition invariants on a random graph", "[spectral]") {
  const gd::Graph g = gd::erdos_renyi(20, 0.25, 11);
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);
  const gd::SpectralBasis b = gd::decompose(s, 3);
  const double n = 20.0;

  // S V = V diag(lambda) with the scaled eigenvector convention
  const gd::CMat lhs = s.matrix * b.v;
  const gd::CMat rhs = b.v * b.eigvals.asDiagonal();
  CHECK((lhs - rhs).norm() < 1e-9 * b.v.norm());

  CHECK((b.u * b.v / n - gd::CMat::Identity(20, 20)).norm() < 1e-10);
  CHECK((b.u.adjoint() * b.u / n - gd::CMat::Identity(20, 20)).norm() < 1e-10);
  CHECK((b.psi.adjoint() * b.psi - gd::CMat::Identity(3, 3)).norm() < 1e-10);
  CHECK((b.psi * b.tap_transform - b.psi_raw).norm() < 1e-10);

  // Vandermonde columns are powers of the eigenvalues
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 3; ++j)
      CHECK(std::abs(b.psi_raw(i, j) - std::pow(b.eigvals(i), double(j))) <
            1e-10);

  // ascending eigenvalue order
  for (Index i = 1; i < 20; ++i)
    CHECK(b.eigvals(i).real() >= b.eigvals(i - 1).real() - 1e-12);

  // symmetric input: everything real
  CHECK(gd::max_imag(b.v) < 1e-12);
  CHECK(gd::max_imag(b.psi) < 1e-12);
}

TEST_CASE("two-node path has the textbook spectrum", "[spectral]") {
  gd::Graph g;
  g.n = 2;
  g.edges = {{0, 1, 1.0}};
  const gd::SpectralBasis b =
      gd::decompose(gd::gso_from_graph(g, gd::GsoKind::adjacency), 2);
  CHECK(std::abs(b.eigvals(0) - gd::Complex(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(b.eigvals(1) - gd::Complex(1.0, 0.0)) < 1e-12);
  // psi_raw rows follow the sorted eigenvalues: [1, -1] then [1, 1]
  CHECK(std::abs(b.psi_raw(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(b.psi_raw(0, 1) + 1.0) < 1e-12);
  CHECK(std::abs(b.psi_raw(1, 0) - 1.0) < 1e-12);
  CHECK(std::abs(b.psi_raw(1, 1) - 1.0) < 1e-12);
  // v = sqrt(2) * orthonormal eigenvectors, phase-fixed on the first entry
  gd::CMat expect(2, 2);
  expect << 1, 1, -1, 1;
  CHECK((b.v - expect).norm() < 1e-12);
  CHECK(b.distinct_eigvals);
  CHECK(b.tap_transform_invertible);
}

TEST_CASE("filters with elementary taps", "[spectral]") {
  gd::Graph g;
  g.n = 2;
  g.edges = {{0, 1, 1.0}};
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);

  gd::CVec x(2);
  x << 3.0, -2.0;
  gd::CVec h1(1);
  h1 << 1.0;
  CHECK((gd::apply_filter_vertex(s, h1, x) - x).norm() == 0.0);

  gd::CVec h_shift(2);
  h_shift << 0.0, 1.0;  // pure shift swaps the two endpoints
  const gd::CVec y = gd::apply_filter_vertex(s, h_shift, x);
  CHECK(y(0) == gd::Complex(-2.0, 0.0));
  CHECK(y(1) == gd::Complex(3.0, 0.0));

  gd::CVec ones(2);
  ones << 1.0, 1.0;
  gd::CVec e0(2);
  e0 << 1.0, 0.0;
  const gd::CVec y2 = gd::apply_filter_vertex(s, ones, e0);
  CHECK(y2(0) == gd::Complex(1.0, 0.0));
  CHECK(y2(1) == gd::Complex(1.0, 0.0));

  CHECK_THROWS_AS(gd::apply_filter_vertex(s, gd::CVec(), x),
                  gd::parameter_error);
  CHECK_THROWS_AS(gd::apply_filter_vertex(s, gd::CVec::Ones(3), x),
                  gd::parameter_error);
  gd::CVec short_x(1);
  short_x << 1.0;
  CHECK_THROWS_AS(gd::apply_filter_vertex(s, h1, short_x),
                  gd::parameter_error);
}

TEST_CASE("transform round trip and norm convention", "[spectral]") {
  const gd::SpectralBasis b = er_basis_for_test(18, 0.3, 3, 21);
  auto rng = gd::make_rng(77);
  const gd::CVec x = gd::to_complex(gd::gaussian_vector(18, rng));
  const gd::CVec xhat = gd::gft_signal(b, x);
  CHECK((gd::igft_signal(b, xhat) - x).norm() < 1e-10 * x.norm());
  // u has row norms sqrt(N): the transform scales energy by N
  CHECK(std::abs(xhat.squaredNorm() - 18.0 * x.squaredNorm()) <
        1e-8 * xhat.squaredNorm());
}

TEST_CASE("frequency response on the two-node path", "[spectral]") {
  gd::Graph g;
  g.n = 2;
  g.edges = {{0, 1, 1.0}};
  const gd::SpectralBasis b =
      gd::decompose(gd::gso_from_graph(g, gd::GsoKind::adjacency), 2);
  gd::CVec h(2);
  h << 2.0, 0.5;
  const gd::CVec resp = gd::filter_response(b, h);
  CHECK(std::abs(resp(0) - gd::Complex(1.5, 0.0)) < 1e-12);  // at lambda=-1
  CHECK(std::abs(resp(1) - gd::Complex(2.5, 0.0)) < 1e-12);  // at lambda=+1
}

TEST_CASE("vertex and spectral filtering agree, including complex spectra",
          "[spectral]") {
  auto rng = gd::make_rng(5150);
  for (int t = 0; t < 5; ++t) {
    const gd::Graph g = gd::erdos_renyi(16 + t, 0.3, 100 + t);
    const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);
    const gd::SpectralBasis b = gd::decompose(s, 1 + t % 4);
    const gd::CVec x = gd::to_complex(gd::gaussian_vector(16 + t, rng));
    const gd::CVec h = gd::to_complex(gd::gaussian_vector(1 + t % 4, rng));
    const gd::CVec yv = gd::apply_filter_vertex(s, h, x);
    const gd::CVec ys = gd::apply_filter_spectral(b, h, x);
    CHECK((yv - ys).norm() < 1e-9 * std::max(1.0, yv.norm()));
  }

  // normal but non-hermitian shift: complex eigenvalues exercise the
  // complex-arithmetic path
  gd::RMat rot = gd::RMat::Zero(4, 4);
  rot(0, 1) = rot(1, 2) = rot(2, 3) = rot(3, 0) = 1.0;
  const gd::Gso s = gd::make_gso(rot);
  REQUIRE(s.normal);
  REQUIRE_FALSE(s.hermitian);
  const gd::SpectralBasis b = gd::decompose(s, 3);
  CHECK(gd::max_imag(b.eigvals) > 0.5);  // genuinely complex spectrum
  const gd::CVec x = gd::to_complex(gd::gaussian_vector(4, rng));
  const gd::CVec h = gd::to_complex(gd::gaussian_vector(3, rng));
  const gd::CVec yv = gd::apply_filter_vertex(s, h, x);
  const gd::CVec ys = gd::apply_filter_spectral(b, h, x);
  CHECK((yv - ys).norm() < 1e-9 * std::max(1.0, yv.norm()));
}

TEST_CASE("lifted operator matches filtering on outer products", "[spectral]") {
  auto rng = gd::make_rng(31);
  const gd::SpectralBasis b = er_basis_for_test(14, 0.35, 3, 300);
  REQUIRE(b.tap_transform_invertible);
  const gd::CMat m = gd::transfer_matrix(b);
  REQUIRE(m.rows() == 14);
  REQUIRE(m.cols() == 14 * 3);
  for (int t = 0; t < 5; ++t) {
    const gd::CVec x = gd::to_complex(gd::gaussian_vector(14, rng));
    const gd::CVec hp = gd::to_complex(gd::gaussian_vector(3, rng));
    gd::CVec zvec(14 * 3);
    for (Index j = 0; j < 3; ++j)
      for (Index i = 0; i < 14; ++i) zvec(j * 14 + i) = x(i) * hp(j);
    const gd::CVec y1 = m * zvec;
    const gd::CVec y2 = gd::apply_filter_spectral(b, b.to_raw_taps(hp), x);
    CHECK((y1 - y2).norm() < 1e-9 * std::max(1.0, y2.norm()));
  }
  // zero input maps to zero
  CHECK((m * gd::CVec::Zero(14 * 3)).norm() == 0.0);
}

TEST_CASE("tap coordinate conversions invert each other", "[spectral]") {
  const gd::SpectralBasis b = er_basis_for_test(12, 0.4, 4, 17);
  REQUIRE(b.tap_transform_invertible);
  auto rng = gd::make_rng(9);
  const gd::CVec h = gd::to_complex(gd::gaussian_vector(4, rng));
  const gd::CVec hp = b.to_orthonormal_taps(h);
  CHECK((b.to_raw_taps(hp) - h).norm() < 1e-9 * h.norm());
  CHECK_THROWS_AS(b.to_orthonormal_taps(gd::CVec::Ones(3)),
                  gd::parameter_error);
}

TEST_CASE("repeated eigenvalues make the tap transform singular",
          "[spectral]") {
  gd::Graph g;  // two disjoint edges: eigenvalues {-1, -1, +1, +1}
  g.n = 4;
  g.edges = {{0, 1, 1.0}, {2, 3, 1.0}};
  const gd::SpectralBasis b =
      gd::decompose(gd::gso_from_graph(g, gd::GsoKind::adjacency), 3);
  CHECK_FALSE(b.distinct_eigvals);
  CHECK_FALSE(b.tap_transform_invertible);
  CHECK_THROWS_AS(b.to_raw_taps(gd::CVec::Ones(3)), gd::numeric_error);
}

TEST_CASE("decomposition rejects bad inputs", "[spectral]") {
  const gd::Graph g = gd::erdos_renyi(6, 0.5, 2);
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);
  CHECK_THROWS_AS(gd::decompose(s, 0), gd::parameter_error);
  CHECK_THROWS_AS(gd::decompose(s, 7), gd::parameter_error);

  gd::RMat nil = gd::RMat::Zero(3, 3);
  nil(0, 1) = 1.0;
  CHECK_THROWS_AS(gd::decompose(gd::make_gso(nil), 2), gd::model_error);
}

TEST_CASE("decomposition is deterministic", "[spectral]") {
  const gd::Graph g = gd::erdos_renyi(15, 0.3, 8);
  const gd::Gso s = gd::gso_from_graph(g, gd::GsoKind::adjacency);
  const gd::SpectralBasis a = gd::decompose(s, 3);
  const gd::SpectralBasis b = gd::decompose(s, 3);
  CHECK((a.v - b.v).norm() == 0.0);
  CHECK((a.psi - b.psi).norm() == 0.0);
  CHECK((a.eigvals - b.eigvals).norm() == 0.0);
}
