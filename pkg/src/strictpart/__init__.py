"""Strictly balanced graph partitioning with small maximum boundary cost."""

from .errors import (ContractViolation, DomainError, InternalInvariantError, OracleMisbehavior,
                     ParameterError, SizeError, StrictPartError)
from .graph import (Coloring, SubgraphView, WeightedGraph, boundary_cost, is_strictly_balanced,
                    p_norm)
from .oracles import (ExhaustiveOracle, GreedyOracle, InstrumentedOracle, SeparatorOracle,
                      SplitOracle, make_oracle)
from .grid import GridGraph, GridOracle, grid_split, is_monotone
from .multibalance import balance_boundary, multibalance, multibalcut
from .strict import ShrinkConfig, partition
from .instances import greedy_baseline, lower_bound_report, measure_coloring, replicate_instance

__version__ = "0.1.0"

__all__ = [
    "Coloring", "ContractViolation", "DomainError", "ExhaustiveOracle", "GreedyOracle", "GridGraph",
    "GridOracle", "InstrumentedOracle", "InternalInvariantError", "OracleMisbehavior",
    "ParameterError", "SeparatorOracle", "ShrinkConfig", "SizeError", "SplitOracle",
    "StrictPartError", "SubgraphView", "WeightedGraph", "balance_boundary", "boundary_cost",
    "greedy_baseline", "grid_split", "is_monotone", "is_strictly_balanced", "lower_bound_report",
    "make_oracle", "measure_coloring", "multibalance", "multibalcut", "p_norm", "partition",
    "replicate_instance",
]
