// Blind deconvolution on a single random graph (the R = 1 special case):
// recover a sparse input and the diffusion filter taps from one observed
// output, given only the graph.

#include <cstdio>

#include "graphdemix/graphdemix.hpp"

namespace gd = graphdemix;

int main() {
  const gd::Index n = 40, l = 3, s = 4;
  const std::uint64_t seed = 7;

  const gd::Graph g = gd::erdos_renyi(n, 0.15, seed);
  auto basis = std::make_shared<const gd::SpectralBasis>(
      gd::decompose(gd::gso_from_graph(g, gd::GsoKind::adjacency), l));
  const gd::BasisList bases{basis};

  const gd::GroundTruth gt = gd::plant_ground_truth(bases, {s}, seed);
  const gd::DemixProblem prob = gd::synthesize_mixture(bases, gt);

  std::printf("graph: ER(n=%d, p=0.15), %d edges; filter length %d, "
              "input sparsity %d\n",
              static_cast<int>(n), static_cast<int>(g.edge_count()),
              static_cast<int>(l), static_cast<int>(s));

  gd::SolverConfig cfg;
  const gd::LiftedSolution sol = gd::solve_logdet(prob, cfg);
  const double de = gd::demixing_error(sol.xs_hat, sol.hs_hat, gt);

  std::printf("solver: %ld iterations, converged=%d, refined=%d\n",
              static_cast<long>(sol.iterations), sol.converged ? 1 : 0,
              sol.refined ? 1 : 0);
  std::printf("planted support:  ");
  for (auto v : gt.supports[0]) std::printf("%d ", static_cast<int>(v));
  std::printf("\nrecovered (|x| > 1e-6):  ");
  for (gd::Index v = 0; v < n; ++v)
    if (std::abs(sol.xs_hat[0](v)) > 1e-6) std::printf("%d ", static_cast<int>(v));
  std::printf("\ndemixing error: %.3e  (success threshold 1e-3)\n", de);
  return gd::success(de, 1e-3) ? 0 : 1;
}
