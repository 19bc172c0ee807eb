"""Weighted graphs, induced views, measures and colorings.

Vertex sets are passed around as integer numpy arrays of vertex ids. Functions
that return vertex sets always return them sorted and duplicate free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DomainError, ParameterError

RECOMPUTE_EVERY = 1 << 16


def as_vertex_set(U, n: Optional[int] = None) -> np.ndarray:
    """Normalize ``U`` to a sorted unique int64 array, checking the id range."""
    arr = np.unique(np.asarray(U, dtype=np.int64).ravel())
    if n is not None and arr.size and (arr[0] < 0 or arr[-1] >= n):
        bad = arr[(arr < 0) | (arr >= n)]
        raise DomainError(f"vertex ids {bad[:5].tolist()} outside 0..{n - 1}")
    return arr


class WeightedGraph:
    """Immutable undirected graph with edge costs ``c`` and vertex weights ``w``.

    Edges are stored as an ``(m, 2)`` array with ``u < v`` not required; the
    adjacency is a CSR structure listing ``(neighbor, edge id)`` pairs. An
    optional ``coords`` array holds integer grid coordinates.
    """

    def __init__(self, n, edges=(), costs=None, weights=None, coords=None):
        n = int(n)
        if n < 0:
            raise ParameterError("vertex count must be nonnegative")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        m = edges.shape[0]
        costs = np.ones(m) if costs is None else np.asarray(costs, dtype=np.float64).ravel()
        weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
        if costs.shape[0] != m:
            raise ParameterError(f"got {costs.shape[0]} costs for {m} edges")
        if weights.shape[0] != n:
            raise ParameterError(f"got {weights.shape[0]} weights for {n} vertices")
        if m and (edges.min() < 0 or edges.max() >= n):
            raise DomainError("edge endpoint outside vertex range")
        if np.any(edges[:, 0] == edges[:, 1]):
            e = int(np.flatnonzero(edges[:, 0] == edges[:, 1])[0])
            raise ParameterError(f"self-loop at edge {e}")
        if m:
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            keys = lo * n + hi
            if np.unique(keys).size != m:
                raise ParameterError("parallel edges are not allowed")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise ParameterError("edge costs must be finite and nonnegative")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ParameterError("vertex weights must be finite and nonnegative")
        tiny = np.finfo(np.float64).tiny
        if np.any((costs > 0) & (costs < tiny)) or np.any((weights > 0) & (weights < tiny)):
            raise ParameterError("subnormal costs or weights are not supported")
        if coords is not None:
            coords = np.asarray(coords, dtype=np.int64)
            if coords.ndim != 2 or coords.shape[0] != n:
                raise ParameterError("coords must have shape (n, d)")
            coords.setflags(write=False)

        self.n = n
        self.m = m
        self.edges = edges
        self.costs = costs
        self.weights = weights
        self.coords = coords
        for arr in (edges, costs, weights):
            arr.setflags(write=False)

        ends = np.concatenate([edges[:, 0], edges[:, 1]])
        nbrs = np.concatenate([edges[:, 1], edges[:, 0]])
        eids = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((nbrs, ends))
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=self.indptr[1:])
        self.adj_vertex = nbrs[order]
        self.adj_edge = eids[order]
        for arr in (self.indptr, self.adj_vertex, self.adj_edge):
            arr.setflags(write=False)
        self._tau = None

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"

    def neighbors(self, v: int):
        """List of ``(neighbor, edge id)`` pairs of ``v``."""
        a, b = self.indptr[v], self.indptr[v + 1]
        return list(zip(self.adj_vertex[a:b].tolist(), self.adj_edge[a:b].tolist()))

    @property
    def vertex_costs(self) -> np.ndarray:
        """tau(v) = c(delta(v)), the weighted degree."""
        if self._tau is None:
            tau = np.zeros(self.n)
            np.add.at(tau, self.edges[:, 0], self.costs)
            np.add.at(tau, self.edges[:, 1], self.costs)
            tau.setflags(write=False)
            self._tau = tau
        return self._tau

    def with_weights(self, weights) -> "WeightedGraph":
        return WeightedGraph(self.n, self.edges, self.costs, weights, self.coords)

    def view(self, members=None) -> "SubgraphView":
        return SubgraphView(self, members)


class SubgraphView:
    """The subgraph ``G[W]`` induced by a vertex set ``W`` of a host graph."""

    def __init__(self, host: WeightedGraph, members=None, _edge_ids=None):
        self.host = host
        if members is None:
            self.members = np.arange(host.n, dtype=np.int64)
        else:
            self.members = as_vertex_set(members, host.n)
        self.mask = np.zeros(host.n, dtype=bool)
        self.mask[self.members] = True
        if _edge_ids is None:
            e = host.edges
            _edge_ids = np.flatnonzero(self.mask[e[:, 0]] & self.mask[e[:, 1]])
        self.edge_ids = _edge_ids
        self._local = None

    def __len__(self):
        return int(self.members.size)

    def __repr__(self):
        return f"SubgraphView(|W|={self.members.size}, |E(W)|={self.edge_ids.size})"

    @property
    def size(self) -> int:
        """|G[W]| = |W| + |E(W)|."""
        return int(self.members.size + self.edge_ids.size)

    @property
    def costs(self) -> np.ndarray:
        """Restricted costs c|W over the induced edges."""
        return self.host.costs[self.edge_ids]

    def sub(self, U) -> "SubgraphView":
        """Induced view on ``U`` (must be a subset of this view)."""
        U = as_vertex_set(U, self.host.n)
        if U.size and not self.mask[U].all():
            raise DomainError("sub-view members must lie in the parent view")
        child = SubgraphView.__new__(SubgraphView)
        child.host = self.host
        child.members = U
        child.mask = np.zeros(self.host.n, dtype=bool)
        child.mask[U] = True
        e = self.host.edges[self.edge_ids]
        child.edge_ids = self.edge_ids[child.mask[e[:, 0]] & child.mask[e[:, 1]]]
        child._local = None
        return child

    def complement(self, U) -> np.ndarray:
        """W minus U."""
        keep = self.mask.copy()
        keep[np.asarray(U, dtype=np.int64)] = False
        return np.flatnonzero(keep)

    def local_adjacency(self):
        """Local CSR of the view: (position map, indptr, neighbor positions, edge ids).

        Positions index into ``members``.
        """
        if self._local is None:
            pos = np.full(self.host.n, -1, dtype=np.int64)
            pos[self.members] = np.arange(self.members.size)
            e = self.host.edges[self.edge_ids]
            a, b = pos[e[:, 0]], pos[e[:, 1]]
            ends = np.concatenate([a, b])
            nbrs = np.concatenate([b, a])
            eids = np.concatenate([self.edge_ids, self.edge_ids])
            order = np.lexsort((nbrs, ends))
            indptr = np.zeros(self.members.size + 1, dtype=np.int64)
            np.cumsum(np.bincount(ends, minlength=self.members.size), out=indptr[1:])
            self._local = (pos, indptr, nbrs[order], eids[order])
        return self._local

    def vertex_costs(self) -> np.ndarray:
        """tau_W(v) = c(delta(v) within G[W]) as a host-length array (0 outside W)."""
        tau = np.zeros(self.host.n)
        e = self.host.edges[self.edge_ids]
        c = self.host.costs[self.edge_ids]
        np.add.at(tau, e[:, 0], c)
        np.add.at(tau, e[:, 1], c)
        return tau


class Measure:
    """Nonnegative vertex function with cached total and maximum."""

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64).ravel().copy()
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ParameterError("measure values must be finite and nonnegative")
        values.setflags(write=False)
        self.values = values
        self.total = float(values.sum())
        self.max_value = float(values.max()) if values.size else 0.0

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.size

    def __call__(self, U) -> float:
        return float(self.values[np.asarray(U, dtype=np.int64)].sum())

    def max_on(self, U) -> float:
        U = np.asarray(U, dtype=np.int64)
        return float(self.values[U].max()) if U.size else 0.0

    def average(self, k: int) -> float:
        return self.total / k

    def class_sums(self, coloring: "Coloring") -> np.ndarray:
        return class_sums(coloring.colors, self.values, coloring.k)

    def __mul__(self, scale: float) -> "Measure":
        return Measure(self.values * float(scale))

    __rmul__ = __mul__


def values_of(measure) -> np.ndarray:
    return measure.values if isinstance(measure, Measure) else np.asarray(measure, dtype=np.float64)


def class_sums(colors: np.ndarray, values: np.ndarray, k: int) -> np.ndarray:
    dom = colors >= 0
    return np.bincount(colors[dom], weights=values[dom], minlength=k).astype(np.float64)


def class_boundaries(graph: WeightedGraph, colors: np.ndarray, k: int) -> np.ndarray:
    """c(delta(chi^-1(i))) for every class, with respect to the host graph."""
    if graph.m == 0:
        return np.zeros(k)
    cu = colors[graph.edges[:, 0]]
    cv = colors[graph.edges[:, 1]]
    cut = cu != cv
    out = np.zeros(k)
    a = cut & (cu >= 0)
    b = cut & (cv >= 0)
    out += np.bincount(cu[a], weights=graph.costs[a], minlength=k)
    out += np.bincount(cv[b], weights=graph.costs[b], minlength=k)
    return out


class Coloring:
    """Assignment of the vertices of a domain to colors ``0..k-1``.

    ``colors[v] == -1`` marks vertices outside the domain. Class weights and
    class boundary costs are maintained incrementally by :meth:`recolor` and
    recomputed from scratch every ``RECOMPUTE_EVERY`` vertex mutations.
    """

    def __init__(self, graph: WeightedGraph, k: int, colors, weights=None):
        if k < 1:
            raise ParameterError("k must be at least 1")
        colors = np.asarray(colors, dtype=np.int64).copy()
        if colors.shape != (graph.n,):
            raise ParameterError("colors must have one entry per host vertex")
        if colors.size and (colors.min() < -1 or colors.max() >= k):
            raise DomainError("color out of range")
        self.graph = graph
        self.k = int(k)
        self.weights = graph.weights if weights is None else values_of(weights)
        self._colors = colors
        self._mutations = 0
        self.recompute()

    @classmethod
    def constant(cls, graph, k, color=0, domain=None):
        colors = np.full(graph.n, -1 if domain is not None else color, dtype=np.int64)
        if domain is not None:
            colors[np.asarray(domain, dtype=np.int64)] = color
        return cls(graph, k, colors)

    @property
    def colors(self) -> np.ndarray:
        view = self._colors.view()
        view.setflags(write=False)
        return view

    @property
    def domain(self) -> np.ndarray:
        return np.flatnonzero(self._colors >= 0)

    def is_total(self) -> bool:
        return bool(np.all(self._colors >= 0))

    def class_members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._colors == i)

    def classes(self):
        order = np.argsort(self._colors, kind="stable")
        sorted_colors = self._colors[order]
        bounds = np.searchsorted(sorted_colors, np.arange(self.k + 1))
        return [np.sort(order[bounds[i]:bounds[i + 1]]) for i in range(self.k)]

    def recompute(self) -> None:
        self.class_weights = class_sums(self._colors, self.weights, self.k)
        self.class_boundary = class_boundaries(self.graph, self._colors, self.k)
        self._mutations = 0

    def _edge_contrib(self, eids: np.ndarray, sign: float) -> None:
        if eids.size == 0:
            return
        e = self.graph.edges[eids]
        c = self.graph.costs[eids]
        cu = self._colors[e[:, 0]]
        cv = self._colors[e[:, 1]]
        cut = cu != cv
        a = cut & (cu >= 0)
        b = cut & (cv >= 0)
        np.add.at(self.class_boundary, cu[a], sign * c[a])
        np.add.at(self.class_boundary, cv[b], sign * c[b])

    def recolor(self, vertices, color: int) -> None:
        """Give every vertex in ``vertices`` the color ``color`` (``-1`` removes it)."""
        if not -1 <= color < self.k:
            raise DomainError(f"color {color} out of range")
        vertices = as_vertex_set(vertices, self.graph.n)
        if vertices.size == 0:
            return
        eids = np.unique(incident_edges(self.graph, vertices))
        self._edge_contrib(eids, -1.0)
        old = self._colors[vertices]
        dom = old >= 0
        np.subtract.at(self.class_weights, old[dom], self.weights[vertices[dom]])
        self._colors[vertices] = color
        if color >= 0:
            self.class_weights[color] += float(self.weights[vertices].sum())
        self._edge_contrib(eids, 1.0)
        self._mutations += int(vertices.size)
        if self._mutations >= RECOMPUTE_EVERY:
            self.recompute()

    def copy(self) -> "Coloring":
        return Coloring(self.graph, self.k, self._colors, self.weights)

    def restrict(self, vertices) -> "Coloring":
        keep = np.zeros(self.graph.n, dtype=bool)
        keep[np.asarray(vertices, dtype=np.int64)] = True
        colors = np.where(keep, self._colors, -1)
        return Coloring(self.graph, self.k, colors, self.weights)

    def direct_sum(self, other: "Coloring") -> "Coloring":
        """Union of two colorings with disjoint domains."""
        if other.k != self.k:
            raise ParameterError("direct sum needs equal k")
        if np.any((self._colors >= 0) & (other._colors >= 0)):
            raise DomainError("direct sum needs disjoint domains")
        colors = np.where(self._colors >= 0, self._colors, other._colors)
        return Coloring(self.graph, self.k, colors, self.weights)

    def __eq__(self, other):
        return (isinstance(other, Coloring) and self.k == other.k
                and np.array_equal(self._colors, other._colors))

    def __repr__(self):
        return f"Coloring(k={self.k}, domain={int((self._colors >= 0).sum())})"


def incident_edges(graph: WeightedGraph, vertices: np.ndarray) -> np.ndarray:
    """Edge ids incident to ``vertices`` (with repetitions for internal edges)."""
    vertices = np.asarray(vertices, dtype=np.int64)
    starts = graph.indptr[vertices]
    counts = graph.indptr[vertices + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts)
    return graph.adj_edge[np.arange(total) + offsets]


def boundary_cost(view, U, scope: str = "view") -> float:
    """Cost of the edges with exactly one endpoint in ``U``.

    ``view`` may be a :class:`SubgraphView` or a :class:`WeightedGraph` (whole
    graph). With ``scope="view"`` only induced edges of the view count.
    """
    if isinstance(view, WeightedGraph):
        view = SubgraphView(view)
    host = view.host
    U = np.asarray(U, dtype=np.int64).ravel()
    if U.size and (U.min() < 0 or U.max() >= host.n):
        raise DomainError("vertex outside host graph")
    inU = np.zeros(host.n, dtype=bool)
    inU[U] = True
    if scope == "view":
        if U.size and not view.mask[U].all():
            raise DomainError("vertex outside view")
        eids = view.edge_ids
    elif scope == "host":
        eids = slice(None)
    else:
        raise ParameterError(f"unknown scope {scope!r}")
    e = host.edges[eids]
    cut = inU[e[:, 0]] != inU[e[:, 1]]
    return float(host.costs[eids][cut].sum())


def cut_between(graph: WeightedGraph, colors: np.ndarray, edge_ids=None) -> float:
    """Total cost of edges whose endpoints have different labels."""
    eids = slice(None) if edge_ids is None else edge_ids
    e = graph.edges[eids]
    return float(graph.costs[eids][colors[e[:, 0]] != colors[e[:, 1]]].sum())


def p_norm(costs, p) -> float:
    """``(sum c^p)^(1/p)``; ``p = math.inf`` gives the maximum."""
    p = float(p)
    if not p > 1:
        raise ParameterError("p must exceed 1")
    c = np.abs(np.asarray(costs, dtype=np.float64).ravel())
    if c.size == 0:
        return 0.0
    if math.isinf(p):
        return float(c.max())
    top = float(c.max())
    if top == 0:
        return 0.0
    # scaling by the maximum keeps large exponents from overflowing
    return top * float(np.sum((c / top) ** p)) ** (1.0 / p)


@dataclass
class BalanceReport:
    """Result of :func:`is_strictly_balanced`."""

    balanced: bool
    average: float
    tolerance: float
    deviations: np.ndarray = field(repr=False)

    @property
    def slack(self) -> float:
        """Tolerance minus the largest absolute deviation (negative if violated)."""
        worst = float(np.abs(self.deviations).max()) if self.deviations.size else 0.0
        return self.tolerance - worst

    def __bool__(self):
        return self.balanced


def is_strictly_balanced(coloring: Coloring, weights=None, k: Optional[int] = None,
                         atol: float = 1e-9) -> BalanceReport:
    """Check ``|w(class i) - ||w||_1/k| <= (1 - 1/k) max w`` for every class.

    ``coloring`` may also be a raw color array, in which case ``k`` is needed.
    Weights default to the coloring's own weights.
    """
    if isinstance(coloring, Coloring):
        colors, k = coloring.colors, coloring.k
        w = coloring.weights if weights is None else values_of(weights)
    else:
        colors = np.asarray(coloring, dtype=np.int64)
        if k is None or weights is None:
            raise ParameterError("raw color arrays need k and weights")
        w = values_of(weights)
    dom = colors >= 0
    sums = class_sums(colors, w, k)
    total = float(w[dom].sum())
    maxw = float(w[dom].max()) if dom.any() else 0.0
    avg = total / k
    tol = (1.0 - 1.0 / k) * maxw
    dev = sums - avg
    ok = bool(np.all(np.abs(dev) <= tol + atol))
    return BalanceReport(ok, avg, tol, dev)


def max_weighted_degree(graph: WeightedGraph) -> float:
    """Delta_c = max_v c(delta(v))."""
    tau = graph.vertex_costs
    return float(tau.max()) if tau.size else 0.0


def local_fluctuation(graph: WeightedGraph) -> float:
    """max over incident pairs u in e of tau(u) / c(e); 1 on edgeless graphs."""
    if graph.m == 0:
        return 1.0
    zero = np.flatnonzero(graph.costs == 0)
    if zero.size:
        raise ParameterError(f"zero-cost edge {int(zero[0])} makes the fluctuation undefined")
    tau = graph.vertex_costs
    e = graph.edges
    top = np.maximum(tau[e[:, 0]], tau[e[:, 1]])
    return float(np.max(top / graph.costs))


def induced_size(graph: WeightedGraph, W) -> int:
    """|G[W]| = |W| + |E(W)|."""
    mask = np.zeros(graph.n, dtype=bool)
    mask[np.asarray(W, dtype=np.int64)] = True
    e = graph.edges
    return int(mask.sum() + np.count_nonzero(mask[e[:, 0]] & mask[e[:, 1]]))


def union(*sets: Iterable) -> np.ndarray:
    parts = [np.asarray(s, dtype=np.int64).ravel() for s in sets]
    return np.unique(np.concatenate(parts)) if parts else np.zeros(0, np.int64)
