"""
Strictly balanced partitions of a weighted grid
===============================================

Partition a 2-D grid with random edge costs into k classes, compare the
boundary costs with the greedy bin-packing baseline and look at the grid
oracle's monotone splitting sets.
"""

# %%
import numpy as np

from strictpart import GridGraph, GridOracle, greedy_baseline, is_monotone, measure_coloring, partition
from strictpart.grid import GridSplitTrace, grid_split
from strictpart.instances import grid_instance
from strictpart.strict import PipelineReport

bundle = grid_instance((40, 40), seed=1, cost_max=16, weights="random")
g = bundle.graph
grid = GridGraph(g)
print(f"{g.n} vertices, {g.m} edges, total weight {g.weights.sum():.2f}")

# %%
# The pipeline: boundary balancing, shrink and conquer, then final strictification.
for k in (2, 4, 8, 16):
    rep = PipelineReport()
    chi = partition(g, None, GridOracle(grid), k, report=rep)
    ours = measure_coloring(g, chi)
    base = measure_coloring(g, greedy_baseline(g, None, k))
    print(f"k={k:2d}  max boundary {ours.max_boundary:7.0f}  greedy {base.max_boundary:7.0f}  "
          f"ratio to reference {rep.boundary_ratio:.3f}  strict={ours.strictly_balanced}")

# %%
# One splitting set from the grid oracle, with its recursion levels.
trace = GridSplitTrace()
U = grid_split(grid, g.weights, g.weights.sum() / 3, trace=trace)
print(f"|U| = {U.size}, w(U) = {g.weights[U].sum():.3f}, monotone: {is_monotone(grid, U)}")
for lvl in trace.levels:
    print(f"  ell={lvl.ell:3d}  cut {lvl.cut:8.1f}  cut edges inside the cell {lvl.inner_cut_edges}")

# %%
# A picture of the 4-way partition, one character per vertex.
chi = partition(g, None, GridOracle(grid), 4)
pic = np.full((40, 40), " ")
pic[g.coords[:, 0], g.coords[:, 1]] = np.array(list("ABCD"))[chi.colors]
print("\n".join("".join(row) for row in pic))
