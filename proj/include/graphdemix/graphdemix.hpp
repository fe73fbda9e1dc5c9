#pragma once

// Umbrella header: graph construction, spectral machinery, mixture synthesis,
// the lifted convex solver, single-graph separation, recovery diagnostics, and
// the Monte-Carlo experiment harness.

#include "graphdemix/core.hpp"
#include "graphdemix/random.hpp"
#include "graphdemix/datasets.hpp"
#include "graphdemix/graph.hpp"
#include "graphdemix/spectral.hpp"
#include "graphdemix/model.hpp"
#include "graphdemix/prox.hpp"
#include "graphdemix/refine.hpp"
#include "graphdemix/solver.hpp"
#include "graphdemix/single_graph.hpp"
#include "graphdemix/theory.hpp"
#include "graphdemix/stats.hpp"
#include "graphdemix/io.hpp"
#include "graphdemix/experiment.hpp"
