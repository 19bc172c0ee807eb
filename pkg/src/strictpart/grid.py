"""Splitting sets on d-dimensional grid graphs with arbitrary positive edge costs.

The recursion coarsens the grid into cells of side ``ell``, takes a
lexicographic prefix of cells, and recurses into the one cell that straddles
the target with halved costs. Returned sets are monotone: closed under
taking componentwise smaller points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import checks
from .errors import ParameterError
from .graph import WeightedGraph, as_vertex_set, values_of
from .oracles import SplitOracle, _prepare

INT32_MIN, INT32_MAX = -(1 << 31), (1 << 31) - 1


class GridGraph:
    """A weighted graph whose vertices carry distinct integer coordinates.

    Every edge joins two points at l1-distance 1 and every cost is positive.
    """

    def __init__(self, base: WeightedGraph):
        if base.coords is None:
            raise ParameterError("grid graphs need vertex coordinates")
        coords = base.coords
        if coords.size and (coords.min() < INT32_MIN or coords.max() > INT32_MAX):
            raise ParameterError("grid coordinates must fit in 32-bit signed integers")
        if base.n and np.unique(coords, axis=0).shape[0] != base.n:
            raise ParameterError("grid coordinates must be distinct")
        if base.m:
            diff = np.abs(coords[base.edges[:, 0]] - coords[base.edges[:, 1]]).sum(axis=1)
            if np.any(diff != 1):
                e = int(np.flatnonzero(diff != 1)[0])
                raise ParameterError(f"edge {e} does not join l1-neighbors")
            if np.any(base.costs <= 0):
                e = int(np.flatnonzero(base.costs <= 0)[0])
                raise ParameterError(f"edge {e} has nonpositive cost")
        self.base = base
        self.coords = coords
        self.dim = int(coords.shape[1])
        # axis and lower coordinate of every edge, used by the cheap-offset scan
        if base.m:
            delta = coords[base.edges[:, 1]] - coords[base.edges[:, 0]]
            self.edge_axis = np.argmax(np.abs(delta), axis=1)
            self.edge_low = np.minimum(coords[base.edges[:, 0], self.edge_axis],
                                       coords[base.edges[:, 1], self.edge_axis])
        else:
            self.edge_axis = np.zeros(0, dtype=np.int64)
            self.edge_low = np.zeros(0, dtype=np.int64)

    @property
    def n(self):
        return self.base.n

    @property
    def fluctuation(self) -> float:
        c = self.base.costs
        return float(c.max() / c.min()) if c.size else 1.0

    @classmethod
    def lattice(cls, shape, costs=None, weights=None) -> "GridGraph":
        """Full box grid of the given shape; vertex ids follow C order of coordinates."""
        shape = tuple(int(s) for s in shape)
        coords = np.array(np.unravel_index(np.arange(int(np.prod(shape))), shape)).T.astype(np.int64)
        ids = np.arange(coords.shape[0]).reshape(shape)
        edges = []
        for axis in range(len(shape)):
            lo = [slice(None)] * len(shape)
            hi = [slice(None)] * len(shape)
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            edges.append(np.stack([ids[tuple(lo)].ravel(), ids[tuple(hi)].ravel()], axis=1))
        edges = np.concatenate(edges) if edges else np.zeros((0, 2), np.int64)
        return cls(WeightedGraph(coords.shape[0], edges, costs, weights, coords))


@dataclass
class CoarseGraph:
    """Quotient of a grid under the cell map ``x -> floor((x + alpha - 1) / ell)``.

    ``cells`` lists the distinct cell coordinates in lexicographic order and
    ``nodes[i]`` holds the member vertices of cell ``i``. ``arc_pairs`` and
    ``arc_costs`` give the summed cost of edges between two distinct cells.
    """

    ell: int
    alpha: int
    cells: np.ndarray
    nodes: List[np.ndarray]
    arc_pairs: np.ndarray
    arc_costs: np.ndarray
    cell_index: np.ndarray = field(repr=False)

    @property
    def total_arc_cost(self) -> float:
        return float(self.arc_costs.sum())

    def as_dict(self):
        return {tuple(int(x) for x in cell): members for cell, members in zip(self.cells, self.nodes)}


def cell_map(coords: np.ndarray, ell: int, alpha: int) -> np.ndarray:
    return np.floor_divide(coords + (alpha - 1), ell)


def _lex_order(keys: np.ndarray) -> np.ndarray:
    """Stable lexicographic order of integer rows, first column most significant."""
    if keys.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort(keys.T[::-1])


def coarsen(grid: GridGraph, ell: int, alpha: int, vertices=None, edge_ids=None,
            costs=None) -> CoarseGraph:
    """Build the ell-coarse graph with offset alpha (optionally on a sub-grid)."""
    ell, alpha = int(ell), int(alpha)
    if ell < 1:
        raise ParameterError("ell must be at least 1")
    if not 1 <= alpha <= ell:
        raise ParameterError(f"alpha must lie in 1..{ell}")
    V = np.arange(grid.n) if vertices is None else np.asarray(vertices, dtype=np.int64)
    E = np.arange(grid.base.m) if edge_ids is None else np.asarray(edge_ids, dtype=np.int64)
    c = grid.base.costs[E] if costs is None else np.asarray(costs, dtype=np.float64)
    keys = cell_map(grid.coords[V], ell, alpha)
    order = _lex_order(keys)
    sk = keys[order]
    if sk.shape[0]:
        new = np.ones(sk.shape[0], dtype=bool)
        new[1:] = np.any(sk[1:] != sk[:-1], axis=1)
        starts = np.flatnonzero(new)
    else:
        starts = np.zeros(0, dtype=np.int64)
    cells = sk[starts]
    bounds = np.append(starts, sk.shape[0])
    nodes = [np.sort(V[order[bounds[i]:bounds[i + 1]]]) for i in range(starts.size)]
    cell_index = np.full(grid.n, -1, dtype=np.int64)
    label = np.repeat(np.arange(starts.size), np.diff(bounds))
    cell_index[V[order]] = label
    e = grid.base.edges[E]
    a, b = cell_index[e[:, 0]], cell_index[e[:, 1]]
    cross = a != b
    lo, hi = np.minimum(a[cross], b[cross]), np.maximum(a[cross], b[cross])
    if lo.size:
        pair_key = lo * max(starts.size, 1) + hi
        uniq, inv = np.unique(pair_key, return_inverse=True)
        arc_costs = np.bincount(inv, weights=c[cross])
        arc_pairs = np.stack([uniq // max(starts.size, 1), uniq % max(starts.size, 1)], axis=1)
    else:
        arc_costs = np.zeros(0)
        arc_pairs = np.zeros((0, 2), dtype=np.int64)
    return CoarseGraph(ell, alpha, cells, nodes, arc_pairs, arc_costs, cell_index)


def crossing_alpha(grid: GridGraph, ell: int, edge_ids=None) -> np.ndarray:
    """The unique offset alpha in 1..ell for which each edge crosses two cells."""
    E = np.arange(grid.base.m) if edge_ids is None else np.asarray(edge_ids, dtype=np.int64)
    return np.mod(-grid.edge_low[E] - 1, ell) + 1


def offset_costs(grid: GridGraph, ell: int, edge_ids=None, costs=None) -> np.ndarray:
    """Array ``f`` with ``f[alpha]`` the total crossing cost for offset alpha (index 0 unused)."""
    E = np.arange(grid.base.m) if edge_ids is None else np.asarray(edge_ids, dtype=np.int64)
    c = grid.base.costs[E] if costs is None else np.asarray(costs, dtype=np.float64)
    return np.bincount(crossing_alpha(grid, ell, E), weights=c, minlength=ell + 1)


def cheap_alpha(grid: GridGraph, ell: int, edge_ids=None, costs=None) -> int:
    f = offset_costs(grid, ell, edge_ids, costs)
    return int(np.argmin(f[1:])) + 1


def cheap_coarse(grid: GridGraph, ell: int, vertices=None, edge_ids=None, costs=None) -> CoarseGraph:
    """The ell-coarse graph whose offset minimizes the total arc cost (lowest alpha on ties)."""
    if int(ell) < 1:
        raise ParameterError("ell must be at least 1")
    alpha = cheap_alpha(grid, int(ell), edge_ids, costs)
    return coarsen(grid, ell, alpha, vertices, edge_ids, costs)


def side_length(total_cost: float, d: int, m: int) -> int:
    """Smallest integer ell >= 1 with d * ell^d >= total_cost, clamped to m + 1."""
    if total_cost <= d:
        return 1
    ell = max(int(math.ceil((total_cost / d) ** (1.0 / d))), 1)
    while ell > 1 and d * (ell - 1) ** d >= total_cost:
        ell -= 1
    while d * ell ** d < total_cost:
        ell += 1
    return min(ell, m + 1)


def unfolded_bound(costs: np.ndarray, d: int) -> float:
    """2^d d^(1/d) (max c + 1 + sum_i 2^(i/d) ||c|E_i||_1^(1-1/d)), E_i = {c >= 2^i - 1}."""
    maxc = float(costs.max()) if costs.size else 0.0
    top = int(math.floor(math.log2(maxc + 1.0)))
    acc = 0.0
    for i in range(top + 1):
        mass = float(costs[costs >= 2.0 ** i - 1.0].sum())
        acc += 2.0 ** (i / d) * mass ** (1.0 - 1.0 / d)
    return 2.0 ** d * d ** (1.0 / d) * (maxc + 1.0 + acc)


@dataclass
class GridLevel:
    """Bookkeeping for one level of the recursion (costs are normalized)."""

    ell: int
    alpha: int
    total_cost: float
    arc_cost: float
    target: float
    max_weight: float
    members: np.ndarray = field(repr=False)
    edge_ids: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)
    prefix: np.ndarray = field(repr=False)
    cell: np.ndarray = field(repr=False)
    clamped: bool = False
    result: Optional[np.ndarray] = field(default=None, repr=False)
    cut: float = 0.0
    inner_cut_edges: int = 0
    reduced_cut: float = 0.0


@dataclass
class GridSplitTrace:
    scale: float = 1.0
    levels: List[GridLevel] = field(default_factory=list)
    depth: int = 0
    max_cost: float = 0.0
    violations: List[str] = field(default_factory=list)


def _cut(graph: WeightedGraph, edge_ids, costs, inU: np.ndarray):
    e = graph.edges[edge_ids]
    cut = inU[e[:, 0]] != inU[e[:, 1]]
    return float(costs[cut].sum()), int(cut.sum())


def grid_split(grid: GridGraph, weights, target: float, members=None,
               trace: Optional[GridSplitTrace] = None) -> np.ndarray:
    """Monotone splitting set of the sub-grid on ``members`` (default: all vertices)."""
    from .graph import SubgraphView
    base = grid.base
    view = SubgraphView(base, members)
    V, wl, total, mw, target = _prepare(view, weights, target)
    wv = values_of(weights)
    if trace is None and checks.enabled("full"):
        trace = GridSplitTrace()
    E = view.edge_ids
    c_raw = base.costs[E]
    if c_raw.size and np.any(c_raw <= 0):
        raise ParameterError("grid costs must be positive")
    scale = float(c_raw.min()) if c_raw.size else 1.0
    c = c_raw / scale
    if trace is not None:
        trace.scale = scale
        trace.max_cost = float(c.max()) if c.size else 0.0
    if V.size == 0:
        return V
    if target >= total:
        return V.copy()
    d = grid.dim

    levels: List[GridLevel] = []
    cur_V, cur_E, cur_c, t = V, E, c, target
    while True:
        L1 = float(cur_c.sum())
        ell = side_length(L1, d, cur_E.size)
        clamped = ell == cur_E.size + 1 and ell > 1 and d * ell ** d < L1
        alpha = cheap_alpha(grid, ell, cur_E, cur_c)
        coarse = coarsen(grid, ell, alpha, cur_V, cur_E, cur_c)
        node_w = np.bincount(coarse.cell_index[cur_V], weights=wv[cur_V],
                             minlength=len(coarse.nodes))
        cs = np.cumsum(node_w)
        i = int(np.searchsorted(cs, t, side="right"))
        lvl_mw = float(wv[cur_V].max())
        if i >= len(coarse.nodes):
            final = cur_V.copy()
            break
        S = np.concatenate(coarse.nodes[:i]) if i else np.zeros(0, dtype=np.int64)
        Q = coarse.nodes[i]
        wS = float(cs[i - 1]) if i else 0.0
        if ell == 1:
            if t - wS <= node_w[i] / 2:
                final = np.sort(S)
            else:
                final = np.sort(np.concatenate([S, Q]))
            break
        levels.append(GridLevel(ell, alpha, L1, coarse.total_arc_cost, t, lvl_mw,
                                cur_V, cur_E, cur_c, np.sort(S), Q, clamped))
        inQ = np.zeros(base.n, dtype=bool)
        inQ[Q] = True
        e = base.edges[cur_E]
        keep = inQ[e[:, 0]] & inQ[e[:, 1]] & (cur_c > 1)
        cur_V, cur_E, cur_c, t = Q, cur_E[keep], (cur_c[keep] - 1) / 2, t - wS

    U = final
    for lvl in reversed(levels):
        inner = U
        U = np.union1d(lvl.prefix, inner)
        lvl.result = U
        if checks.enabled("cheap") or trace is not None:
            _check_level(grid, wv, lvl, inner, U, trace)
    if trace is not None:
        trace.levels = levels
        trace.depth = len(levels)
        bound = math.floor(math.log2(trace.max_cost + 1.0)) + 1 if trace.max_cost else 1
        if trace.depth > bound:
            trace.violations.append(f"depth {trace.depth} exceeds {bound}")
    weight = float(wv[U].sum())
    checks.require(checks.le(abs(weight - target), mw / 2, total),
                   "grid_split broke the weight window", target=target, weight=weight, max_w=mw)
    if checks.enabled("full"):
        checks.require(is_monotone(grid, U, within=V), "grid_split result is not monotone")
        checks.require(not trace.violations, "grid_split level bound failed",
                       violations=list(trace.violations))
    return U


def _check_level(grid, wv, lvl: GridLevel, inner, U, trace):
    base = grid.base
    d = grid.dim
    inU = np.zeros(base.n, dtype=bool)
    inU[U] = True
    lvl.cut, _ = _cut(base, lvl.edge_ids, lvl.costs, inU)
    inQ = np.zeros(base.n, dtype=bool)
    inQ[lvl.cell] = True
    e = base.edges[lvl.edge_ids]
    in_cell = inQ[e[:, 0]] & inQ[e[:, 1]]
    inner_cut = in_cell & (inU[e[:, 0]] != inU[e[:, 1]])
    lvl.inner_cut_edges = int(inner_cut.sum())
    heavy = inner_cut & (lvl.costs > 1)
    lvl.reduced_cut = float(((lvl.costs[heavy] - 1) / 2).sum())
    problems = []
    weight = float(wv[U].sum())
    if not checks.le(abs(weight - lvl.target), lvl.max_weight / 2, lvl.target):
        problems.append(f"weight window broken at ell={lvl.ell}")
    if lvl.inner_cut_edges > d * lvl.ell ** (d - 1):
        problems.append(f"{lvl.inner_cut_edges} cut edges inside the cell exceed d*ell^(d-1)")
    decomposed = lvl.arc_cost + lvl.inner_cut_edges + 2 * lvl.reduced_cut
    if not checks.le(lvl.cut, decomposed, lvl.total_cost):
        problems.append("cut exceeds arc cost + inner edges + 2 * reduced cut")
    if not checks.le(lvl.arc_cost, lvl.total_cost / lvl.ell, lvl.total_cost):
        problems.append("coarse graph is not cheap")
    if not lvl.clamped:
        eq18 = lvl.total_cost / lvl.ell + d * lvl.ell ** (d - 1) + 2 * lvl.reduced_cut
        if not checks.le(lvl.cut, eq18, lvl.total_cost):
            problems.append("per-level recurrence bound failed")
    if not checks.le(lvl.cut, unfolded_bound(lvl.costs, d), lvl.total_cost):
        problems.append("unfolded cost bound failed")
    if trace is not None and checks.enabled("full"):
        if not is_monotone(grid, inner, within=lvl.cell):
            problems.append("inner set not monotone in its cell")
    if trace is not None:
        trace.violations.extend(problems)
    elif problems:
        checks.require(False, "grid_split level check failed", problems=problems)


def is_monotone(grid, U, within=None) -> bool:
    """True iff no point of ``within`` outside ``U`` is componentwise <= a point of ``U``."""
    coords = grid.coords if isinstance(grid, GridGraph) else np.asarray(grid, dtype=np.int64)
    n = coords.shape[0]
    V = np.arange(n) if within is None else as_vertex_set(within, n)
    U = as_vertex_set(U, n)
    if U.size == 0 or U.size == V.size:
        return True
    inU = np.zeros(n, dtype=bool)
    inU[U] = True
    order = V[_lex_order(coords[V])]
    if inU[order[:U.size]].all():
        return True
    out = V[~inU[V]]
    d = coords.shape[1]
    if d == 1:
        return bool(coords[out, 0].min() > coords[U, 0].max())
    if d == 2:
        # sweep by decreasing x; members before non-members at equal x
        pts = np.concatenate([U, out])
        flag = np.concatenate([np.ones(U.size, dtype=bool), np.zeros(out.size, dtype=bool)])
        x, y = coords[pts, 0], coords[pts, 1]
        idx = np.lexsort((~flag, -x))
        best = -np.inf
        for xi, yi, fi in zip(x[idx].tolist(), y[idx].tolist(), flag[idx].tolist()):
            if fi:
                best = max(best, yi)
            elif best >= yi:
                return False
        return True
    cu = coords[U]
    co = coords[out]
    step = max(1, (1 << 22) // max(1, cu.shape[0] * d))
    for s in range(0, co.shape[0], step):
        block = co[s:s + step]
        if np.any(np.all(block[:, None, :] <= cu[None, :, :], axis=2)):
            return False
    return True


class GridOracle(SplitOracle):
    """Splitting-set oracle for grid graphs."""

    name = "grid"

    def __init__(self, grid: GridGraph, quality_s: float = 1.0, p: Optional[float] = None):
        d = grid.dim
        if p is None:
            p = d / (d - 1) if d > 1 else math.inf
        super().__init__(quality_s, p)
        self.grid = grid

    def split(self, view, weights, target):
        return grid_split(self.grid, weights, target, members=view.members)
