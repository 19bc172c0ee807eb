"""
Comparing splitting oracles
===========================

Every oracle returns a set whose weight is within half the heaviest vertex of
the target. They differ in how much edge cost they cut.
"""

# %%
import numpy as np

from strictpart import ExhaustiveOracle, GreedyOracle, SubgraphView, boundary_cost, make_oracle
from strictpart.instances import random_bounded_degree
from strictpart.oracles import estimate_splittability

g = random_bounded_degree(18, 4, seed=5, cost_max=5).graph
view = SubgraphView(g, np.arange(g.n))
oracles = {"exhaustive": ExhaustiveOracle(), "greedy": GreedyOracle(),
           "separator:bfs": make_oracle("separator:bfs")}

# %%
for target in (0.25, 0.5, 0.7):
    t = target * g.weights.sum()
    costs = {name: boundary_cost(view, o.split(view, g.weights, t)) for name, o in oracles.items()}
    print(f"target {target:.2f}: " + "  ".join(f"{k} {v:5.1f}" for k, v in costs.items()))

# %%
# Empirical splittability: worst observed cut / ||c||_2 over random sub-views.
print(f"estimated 2-splittability: {estimate_splittability(g, p=2.0, trials=16, seed=0):.3f}")
