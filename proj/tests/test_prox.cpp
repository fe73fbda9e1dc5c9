#include <catch2/catch_amalgamated.hpp>

#include "graphdemix/graphdemix.hpp"

namespace gd = graphdemix;
using gd::Index;

namespace {

gd::CMat random_cmat(Index m, Index n, std::uint64_t seed) {
  auto rng = gd::make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  gd::CMat a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = gd::Complex(g(rng), g(rng));
  return a;
}

double spectral_norm(const gd::CMat& m) {
  return Eigen::JacobiSVD<gd::CMat>(m).singularValues()(0);
}

}  // namespace

TEST_CASE("norms agree with direct formulas", "[prox]") {
  gd::CMat d = gd::CMat::Zero(3, 3);
  d(0, 0) = 3.0;
  d(1, 1) = -4.0;  // singular value 4
  CHECK(std::abs(gd::nuclear_norm(d) - 7.0) < 1e-12);
  CHECK(std::abs(gd::l21_norm(d) - 7.0) < 1e-12);
  const gd::RVec s = gd::singular_values(d);
  CHECK(std::abs(s(0) - 4.0) < 1e-12);
  CHECK(std::abs(s(1) - 3.0) < 1e-12);
  CHECK(std::abs(s(2)) < 1e-12);
}

TEST_CASE("singular-value shrinkage satisfies the prox optimality condition",
          "[prox]") {
  // X = prox_{tau ||.||_*}(Y) iff (Y - X)/tau is a nuclear-norm subgradient
  // at X: spectral norm <= 1 and <W, X> = ||X||_*.
  for (int t = 0; t < 10; ++t) {
    const gd::CMat y = random_cmat(10, 4, 1000 + t);
    const double tau = 0.3 + 0.2 * t;
    const gd::CMat x = gd::svt(y, tau);
    const gd::CMat w = (y - x) / tau;
    CHECK(spectral_norm(w) <= 1.0 + 1e-8);
    const double inner = (w.adjoint() * x).trace().real();
    CHECK(std::abs(inner - gd::nuclear_norm(x)) < 1e-8);
  }
  // large threshold collapses to zero
  const gd::CMat y = random_cmat(5, 3, 77);
  CHECK(gd::svt(y, 1e6).norm() == 0.0);
  CHECK_THROWS_AS(gd::svt(y, -1.0), gd::parameter_error);
}

TEST_CASE("weighted singular-value shrinkage thresholds per index", "[prox]") {
  gd::CMat d = gd::CMat::Zero(3, 3);
  d(0, 0) = 5.0;
  d(1, 1) = 3.0;
  d(2, 2) = 1.0;
  gd::RVec taus(3);
  taus << 1.0, 1.0, 2.0;  // nondecreasing against sigma order: 5,3,1
  const gd::CMat x = gd::svt_weighted(d, taus);
  const gd::RVec s = gd::singular_values(x);
  CHECK(std::abs(s(0) - 4.0) < 1e-12);
  CHECK(std::abs(s(1) - 2.0) < 1e-12);
  CHECK(std::abs(s(2)) < 1e-12);  // 1 - 2 clamps at zero
  CHECK_THROWS_AS(gd::svt_weighted(d, gd::RVec::Ones(2)),
                  gd::parameter_error);
}

TEST_CASE("row shrinkage matches its closed form", "[prox]") {
  gd::CMat y(3, 2);
  y << 3.0, 4.0,   // norm 5
       0.3, 0.4,   // norm 0.5: zeroed at tau=1
       0.6, 0.8;   // norm 1: boundary, zeroed (<= tau)
  const gd::CMat x = gd::row_soft_threshold(y, 1.0);
  CHECK(std::abs(x(0, 0) - 3.0 * 0.8) < 1e-12);
  CHECK(std::abs(x(0, 1) - 4.0 * 0.8) < 1e-12);
  CHECK(x.row(1).norm() == 0.0);
  CHECK(x.row(2).norm() == 0.0);
  CHECK_THROWS_AS(gd::row_soft_threshold(y, -0.1), gd::parameter_error);
}

TEST_CASE("row shrinkage prox optimality on random data", "[prox]") {
  // For each row: y - x in tau * subdifferential of the row norm at x.
  for (int t = 0; t < 10; ++t) {
    const gd::CMat y = random_cmat(8, 3, 2000 + t);
    const double tau = 0.8;
    const gd::CMat x = gd::row_soft_threshold(y, tau);
    for (Index i = 0; i < 8; ++i) {
      const double res = (y.row(i) - x.row(i)).norm();
      if (x.row(i).norm() > 0.0) {
        // gradient case: y - x = tau * x/||x||
        const gd::CMat want = tau * x.row(i) / x.row(i).norm();
        CHECK((y.row(i) - x.row(i) - want).norm() < 1e-10);
      } else {
        CHECK(res <= tau + 1e-12);  // subgradient ball
      }
    }
  }
}

TEST_CASE("per-row thresholds are honored", "[prox]") {
  gd::CMat y(2, 2);
  y << 3.0, 4.0, 3.0, 4.0;
  gd::RVec taus(2);
  taus << 0.0, 5.0;
  const gd::CMat x = gd::row_soft_threshold_weighted(y, taus);
  CHECK((x.row(0) - y.row(0)).norm() == 0.0);  // tau=0 is the identity
  CHECK(x.row(1).norm() == 0.0);               // tau >= norm zeroes
  CHECK_THROWS_AS(gd::row_soft_threshold_weighted(y, gd::RVec::Ones(3)),
                  gd::parameter_error);
  gd::RVec neg(2);
  neg << 0.5, -0.5;
  CHECK_THROWS_AS(gd::row_soft_threshold_weighted(y, neg),
                  gd::parameter_error);
}
