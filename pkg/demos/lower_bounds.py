"""
Replicated instances and lower-bound certificates
=================================================

Disjoint copies of a random 4-regular graph force every roughly balanced
k-coloring to cut each copy. The report turns a coloring into per-copy
certificates that never exceed its boundary cost inside the copy.
"""

# %%
from strictpart import GreedyOracle, lower_bound_report, partition, replicate_instance
from strictpart.instances import make_instance

base = make_instance("regular", seed=3, n=60, d=4)

# %%
for k in (4, 8, 12, 16):
    rep = replicate_instance(base, k)
    chi = partition(rep.graph, None, GreedyOracle(), k)
    lb = lower_bound_report(rep, chi)
    rows = ", ".join(f"{c.certificate:.0f}<={c.within_copy_boundary:.0f}" for c in lb.copies)
    print(f"k={k:2d}  copies={rep.params['copies']}  avg boundary {chi.class_boundary.mean():6.1f}  "
          f"certificates {rows}")
print(f"local fluctuation of the copies: {lb.fluctuation:.1f}")
