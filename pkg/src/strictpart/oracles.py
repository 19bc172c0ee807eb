"""Splitting-set oracles.

An oracle receives a view ``G[W]``, a vertex measure ``w`` and a target
``w*`` and returns ``U`` inside ``W`` with ``|w(U) - w*| <= max_W w / 2`` and,
ideally, a small cut ``d_W U``. The quality constant ``s`` relates that cut
to ``||c|W||_p``.
"""

from __future__ import annotations

import heapq
import math
import threading
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import checks
from .errors import OracleMisbehavior, ParameterError, SizeError
from .graph import (Measure, SubgraphView, WeightedGraph, as_vertex_set, boundary_cost,
                    p_norm, values_of)

EMPTY = np.zeros(0, dtype=np.int64)
REL_WINDOW = 1e-12

Separation = Tuple[np.ndarray, np.ndarray]
SeparatorRoutine = Callable[[SubgraphView, np.ndarray], Separation]


def _prepare(view: SubgraphView, weights, target: float):
    W = view.members
    w = values_of(weights)[W]
    total = float(w.sum())
    target = float(target)
    if not math.isfinite(target) or target < -checks.slack(total) or target > total + checks.slack(total):
        raise ParameterError(f"target {target} outside [0, {total}]")
    target = min(max(target, 0.0), total)
    mw = float(w.max()) if w.size else 0.0
    return W, w, total, mw, target


class SplitOracle:
    """Base class: ``split(view, weights, target)`` returns a sorted vertex array."""

    name = "oracle"

    def __init__(self, quality_s: float = 1.0, p: float = 2.0):
        if quality_s < 0:
            raise ParameterError("quality_s must be nonnegative")
        if not p > 1:
            raise ParameterError("p must exceed 1")
        self.quality_s = float(quality_s)
        self.p = float(p)

    def split(self, view: SubgraphView, weights, target: float) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, view, weights, target):
        return self.split(view, weights, target)

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, s={self.quality_s}, p={self.p})"


# ---------------------------------------------------------------- exhaustive

def exhaustive_split(view: SubgraphView, weights, target: float, cap: int = 24) -> np.ndarray:
    """Optimal splitting set by enumerating all subsets of ``W``.

    Among feasible sets the cut is minimized, then ``|w(U) - w*|``, then the
    sorted id list is compared lexicographically.
    """
    W, w, total, mw, target = _prepare(view, weights, target)
    n = W.size
    if n > cap:
        raise SizeError(f"exhaustive oracle capped at {cap} vertices, view has {n}")
    if n == 0:
        return EMPTY
    lo, hi = _window(target, mw, total)
    pos, _, _, _ = view.local_adjacency()
    e = view.host.edges[view.edge_ids]
    ea, eb = pos[e[:, 0]], pos[e[:, 1]]
    ec = view.host.costs[view.edge_ids]

    best_key = None
    best_mask = 0
    chunk = 1 << min(n, 16)
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, min(1 << n, start + chunk), dtype=np.int64)
        wsum = np.zeros(masks.size)
        for j in range(n):
            wsum += ((masks >> j) & 1) * w[j]
        feasible = (wsum >= lo) & (wsum <= hi)
        if not feasible.any():
            continue
        masks, wsum = masks[feasible], wsum[feasible]
        cost = np.zeros(masks.size)
        for a, b, c in zip(ea.tolist(), eb.tolist(), ec.tolist()):
            cost += (((masks >> a) ^ (masks >> b)) & 1) * c
        cmin = cost.min()
        keep = cost == cmin
        dev = np.abs(wsum[keep] - target)
        dmin = dev.min()
        cand = masks[keep][dev == dmin]
        mask = _lex_smallest(cand, n)
        key = (float(cmin), float(dmin))
        if best_key is None or key < best_key or (key == best_key and _lex_less(mask, best_mask, n)):
            best_key, best_mask = key, mask
    chosen = [j for j in range(n) if (best_mask >> j) & 1]
    return W[np.asarray(chosen, dtype=np.int64)] if chosen else EMPTY


def _lex_smallest(cand: np.ndarray, n: int) -> int:
    """Mask whose sorted element list is lexicographically smallest."""
    for j in range(n):
        if cand.size == 1:
            break
        above = cand >> j
        ended = above == 0
        if ended.any():
            return int(cand[ended][0])
        has = (above & 1) == 1
        if has.any() and not has.all():
            cand = cand[has]
    return int(cand[0])


def _lex_less(a: int, b: int, n: int) -> bool:
    la = [j for j in range(n) if (a >> j) & 1]
    lb = [j for j in range(n) if (b >> j) & 1]
    return la < lb


class ExhaustiveOracle(SplitOracle):
    """Ground-truth oracle for tiny views (at most ``cap`` vertices)."""

    name = "exhaustive"

    def __init__(self, cap: int = 24, quality_s: float = 1.0, p: float = 2.0):
        super().__init__(quality_s, p)
        self.cap = int(cap)

    def split(self, view, weights, target):
        return exhaustive_split(view, weights, target, cap=self.cap)


# ---------------------------------------------------------------- greedy

def greedy_split(view: SubgraphView, weights, target: float) -> np.ndarray:
    """Grow a region cheapest-boundary-first until the weight enters the window.

    Afterwards one sweep over the boundary vertices flips any vertex whose move
    lowers the cut without leaving the window.
    """
    W, w, total, mw, target = _prepare(view, weights, target)
    n = W.size
    if n == 0:
        return EMPTY
    lo, hi = _window(target, mw, total)
    if lo <= 0:
        return EMPTY
    if hi >= total:
        return W.copy()
    _, indptr, nbr, eid = view.local_adjacency()
    cost = view.host.costs[eid]
    adj = [list(zip(nbr[indptr[i]:indptr[i + 1]].tolist(), cost[indptr[i]:indptr[i + 1]].tolist()))
           for i in range(n)]
    tau = [sum(c for _, c in a) for a in adj]
    wl = w.tolist()
    inU = [False] * n
    toU = [0.0] * n
    heap = []
    weight = 0.0
    next_seed = 0
    while weight < lo:
        while heap:
            d, v = heapq.heappop(heap)
            if not inU[v] and d == tau[v] - 2 * toU[v]:
                break
        else:
            while inU[next_seed]:
                next_seed += 1
            v = next_seed
        inU[v] = True
        weight += wl[v]
        for u, c in adj[v]:
            if not inU[u]:
                toU[u] += c
                heapq.heappush(heap, (tau[u] - 2 * toU[u], u))

    boundary = [v for v in range(n) if any(inU[u] != inU[v] for u, _ in adj[v])]
    for v in boundary:
        if inU[v]:
            delta = toU[v] - (tau[v] - toU[v])
            new_weight = weight - wl[v]
        else:
            delta = (tau[v] - toU[v]) - toU[v]
            new_weight = weight + wl[v]
        if delta < 0 and lo <= new_weight <= hi:
            inU[v] = not inU[v]
            weight = new_weight
            sign = 1.0 if inU[v] else -1.0
            for u, c in adj[v]:
                toU[u] += sign * c
    chosen = np.flatnonzero(np.asarray(inU))
    return W[chosen]


class GreedyOracle(SplitOracle):
    """Scalable default oracle; its quality is measured, not promised."""

    name = "greedy"

    def split(self, view, weights, target):
        return greedy_split(view, weights, target)


# ---------------------------------------------------------------- split cost measure

def _window(target: float, mw: float, total: float):
    """Weight window of a splitting set, widened by a tolerance relative to w(W).

    The tolerance scales with the weights, so ties that hold exactly in real
    arithmetic are decided the same way for w and for any multiple of w.
    """
    tol = REL_WINDOW * total
    return target - mw / 2 - tol, target + mw / 2 + tol


def split_cost_measure(graph, s: float = 1.0, p: float = 2.0) -> Measure:
    """pi(v) = s^p * sum over incident edges of c^p / 2.

    For a :class:`SubgraphView` only the induced edges count.
    """
    if s < 0:
        raise ParameterError("s must be nonnegative")
    if not p > 1 or math.isinf(p):
        raise ParameterError("the split cost measure needs a finite p > 1")
    if isinstance(graph, SubgraphView):
        host, eids = graph.host, graph.edge_ids
    else:
        host, eids = graph, np.arange(graph.m)
    e = host.edges[eids]
    half = (s ** p) * host.costs[eids] ** p / 2.0
    values = np.zeros(host.n)
    np.add.at(values, e[:, 0], half)
    np.add.at(values, e[:, 1], half)
    return Measure(values)


def degree_measure(view: SubgraphView) -> np.ndarray:
    """deg_W(v), the number of induced edges at v (host-length array)."""
    deg = np.zeros(view.host.n)
    e = view.host.edges[view.edge_ids]
    np.add.at(deg, e[:, 0], 1.0)
    np.add.at(deg, e[:, 1], 1.0)
    return deg


# ---------------------------------------------------------------- separators

def check_separation(view: SubgraphView, measure: np.ndarray, A, B) -> Optional[str]:
    """Return a description of the first contract breach, or ``None``."""
    A = as_vertex_set(A, view.host.n)
    B = as_vertex_set(B, view.host.n)
    both = np.union1d(A, B)
    if not np.array_equal(both, view.members):
        return "A and B do not cover W exactly"
    only_a = np.zeros(view.host.n, dtype=bool)
    only_b = np.zeros(view.host.n, dtype=bool)
    only_a[np.setdiff1d(A, B)] = True
    only_b[np.setdiff1d(B, A)] = True
    e = view.host.edges[view.edge_ids]
    if np.any((only_a[e[:, 0]] & only_b[e[:, 1]]) | (only_b[e[:, 0]] & only_a[e[:, 1]])):
        return "an induced edge joins A\\B and B\\A"
    total = float(measure[view.members].sum())
    bound = 2.0 * total / 3.0 + 1e-9
    if measure[only_a].sum() > bound or measure[only_b].sum() > bound:
        return "a side exceeds 2/3 of the measure"
    return None


def exhaustive_separator(view: SubgraphView, measure, cap: int = 12) -> Separation:
    """Minimum vertex-cost balanced separation by enumerating all 3^|W| labelings.

    Vertex cost is the weighted degree inside the view. The first optimum in
    base-3 enumeration order (lowest id = least significant digit) wins.
    """
    measure = values_of(measure)
    W = view.members
    n = W.size
    if n > cap:
        raise SizeError(f"exhaustive separator capped at {cap} vertices, view has {n}")
    if n == 0:
        return EMPTY, EMPTY
    pos, _, _, _ = view.local_adjacency()
    e = view.host.edges[view.edge_ids]
    ea, eb = pos[e[:, 0]].tolist(), pos[e[:, 1]].tolist()
    mu = measure[W]
    tau = view.vertex_costs()[W]
    bound = 2.0 * float(mu.sum()) / 3.0
    codes = np.arange(3 ** n, dtype=np.int64)
    digits = [(codes // (3 ** j)) % 3 for j in range(n)]
    ok = np.ones(codes.size, dtype=bool)
    for a, b in zip(ea, eb):
        ok &= np.abs(digits[a] - digits[b]) != 2
    side_a = np.zeros(codes.size)
    side_b = np.zeros(codes.size)
    sep_cost = np.zeros(codes.size)
    for j in range(n):
        side_a += (digits[j] == 0) * mu[j]
        side_b += (digits[j] == 2) * mu[j]
        sep_cost += (digits[j] == 1) * tau[j]
    ok &= (side_a <= bound) & (side_b <= bound)
    idx = np.flatnonzero(ok)
    best = int(idx[np.argmin(sep_cost[idx])])
    labels = np.array([digits[j][best] for j in range(n)])
    return W[labels <= 1], W[labels >= 1]


def _bfs_layers(view: SubgraphView, comp: np.ndarray, start: int):
    pos, indptr, nbr, _ = view.local_adjacency()
    seen = {start}
    layer = [start]
    layers = []
    while layer:
        layers.append(layer)
        nxt = []
        for v in layer:
            for u in nbr[indptr[v]:indptr[v + 1]].tolist():
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        layer = sorted(nxt)
    return layers


def _components(view: SubgraphView):
    _, indptr, nbr, _ = view.local_adjacency()
    n = view.members.size
    label = [-1] * n
    comps = []
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = len(comps)
        stack, comp = [s], [s]
        while stack:
            v = stack.pop()
            for u in nbr[indptr[v]:indptr[v + 1]].tolist():
                if label[u] < 0:
                    label[u] = len(comps)
                    stack.append(u)
                    comp.append(u)
        comps.append(sorted(comp))
    return comps


def bfs_separator(view: SubgraphView, measure) -> Separation:
    """Balanced separation from connected components and BFS layers.

    Components are grouped while none exceeds 2/3 of the measure; otherwise
    the heavy component is cut at the BFS layer where the cumulative measure
    first reaches one half.
    """
    measure = values_of(measure)
    W = view.members
    if W.size == 0:
        return EMPTY, EMPTY
    mu = measure[W]
    total = float(mu.sum())
    comps = _components(view)
    comp_mu = [float(mu[c].sum()) for c in comps]
    order = sorted(range(len(comps)), key=lambda i: (-comp_mu[i], comps[i][0]))
    big = order[0]
    if comp_mu[big] <= 2.0 * total / 3.0:
        side, acc = [], 0.0
        for i in order:
            if acc >= total / 3.0:
                break
            side.extend(comps[i])
            acc += comp_mu[i]
        a = np.zeros(W.size, dtype=bool)
        a[side] = True
        return W[a], W[~a]
    comp = comps[big]
    first = _bfs_layers(view, comp, comp[0])
    layers = _bfs_layers(view, comp, first[-1][0])
    cum = 0.0
    cut = len(layers) - 1
    for i, layer in enumerate(layers):
        cum += float(mu[layer].sum())
        if cum >= total / 2.0:
            cut = i
            break
    label = np.full(W.size, -1)
    for i, layer in enumerate(layers):
        label[layer] = 0 if i < cut else (1 if i == cut else 2)
    rest = label < 0
    left = float(mu[label == 0].sum())
    right = float(mu[label == 2].sum())
    label[rest] = 0 if left <= right else 2
    return W[label <= 1], W[label >= 1]


SEPARATORS: Dict[str, SeparatorRoutine] = {
    "exhaustive": exhaustive_separator,
    "bfs": bfs_separator,
}


def separator_to_split(view: SubgraphView, weights, target: float, sep: SeparatorRoutine,
                       p: float = 2.0, alternate: bool = True) -> np.ndarray:
    """Turn a balanced-separator routine into a splitting-set oracle.

    Separations are taken with respect to the split cost measure of the view,
    alternating with degree-balanced ones on odd recursion depths. The final
    separation ``(A0, B0)`` satisfies ``w(A0 \\ B0) <= w* - max w / 2 <= w(A0)``;
    separator vertices are then added cheapest-first while the weight stays
    at most ``w* + max w / 2``.
    """
    W, w, total, mw, target = _prepare(view, weights, target)
    if W.size == 0:
        return EMPTY
    wv = values_of(weights)
    t = target - mw / 2
    if t < 0:
        return EMPTY
    if target >= total - mw / 2:
        return W.copy()
    A0, B0 = _split_rec(view, wv, t, sep, p, alternate, 0)
    core = np.setdiff1d(A0, B0)
    seps = np.intersect1d(A0, B0)
    tau = view.vertex_costs()
    seps = seps[np.lexsort((seps, tau[seps]))]
    weight = float(wv[core].sum())
    take = []
    for v in seps.tolist():
        if weight + wv[v] > target + mw / 2:
            break
        weight += wv[v]
        take.append(v)
    return np.union1d(core, np.asarray(take, dtype=np.int64))


def _split_rec(view, w, t, sep, p, alternate, depth):
    pi = split_cost_measure(view, 1.0, p).values
    if float(pi[view.members].sum()) == 0.0:
        return view.members, view.members
    measure = degree_measure(view) if (alternate and depth % 2 == 1) else pi
    A, B = sep(view, measure)
    A = as_vertex_set(A, view.host.n)
    B = as_vertex_set(B, view.host.n)
    problem = check_separation(view, measure, A, B)
    if problem is not None:
        raise OracleMisbehavior(f"separator contract violated: {problem}",
                                {"view": view.members.tolist(), "A": A.tolist(), "B": B.tolist()})
    a_only = np.setdiff1d(A, B)
    b_only = np.setdiff1d(B, A)
    both = np.intersect1d(A, B)
    wa_only = float(w[a_only].sum())
    wa = float(w[A].sum())
    if t < wa_only:
        A1, B1 = _split_rec(view.sub(a_only), w, t, sep, p, alternate, depth + 1)
        return np.union1d(A1, both), np.union1d(B1, B)
    if t <= wa:
        return A, B
    A1, B1 = _split_rec(view.sub(b_only), w, t - wa, sep, p, alternate, depth + 1)
    return np.union1d(A, A1), np.union1d(B1, both)


class SeparatorOracle(SplitOracle):
    """Oracle built from a balanced-separator routine."""

    def __init__(self, sep: SeparatorRoutine, sep_name: str = "custom",
                 quality_s: float = 1.0, p: float = 2.0, alternate: bool = True):
        super().__init__(quality_s, p)
        self.sep = sep
        self.name = f"separator:{sep_name}"
        self.alternate = alternate

    def split(self, view, weights, target):
        return separator_to_split(view, weights, target, self.sep, self.p, self.alternate)


# ---------------------------------------------------------------- instrumentation

class InstrumentedOracle(SplitOracle):
    """Wrapper that checks the weight contract on every call and tallies quality.

    ``observed_s`` is the largest ratio ``d_W U / ||c|W||_p`` seen so far, i.e.
    the quality the wrapped oracle actually delivered.
    """

    def __init__(self, inner: SplitOracle, raise_on_violation: bool = True):
        super().__init__(inner.quality_s, inner.p)
        self.inner = inner
        self.name = inner.name
        self.raise_on_violation = raise_on_violation
        self._lock = threading.Lock()
        self.calls = 0
        self.violations = 0
        self.observed_s = 0.0
        self.last_violation = None

    def split(self, view, weights, target):
        U = as_vertex_set(self.inner.split(view, weights, target), view.host.n)
        W, w, total, mw, tgt = _prepare(view, weights, target)
        wv = values_of(weights)
        inside = bool(U.size == 0 or view.mask[U].all())
        dev = abs(float(wv[U].sum()) - tgt)
        ok = inside and dev <= mw / 2 + checks.slack(total)
        cut = boundary_cost(view, U, "view") if inside else math.inf
        norm = p_norm(view.costs, self.p)
        ratio = cut / norm if norm > 0 else (0.0 if cut == 0 else math.inf)
        with self._lock:
            self.calls += 1
            self.observed_s = max(self.observed_s, ratio)
            if not ok:
                self.violations += 1
                self.last_violation = {"target": tgt, "weight": float(wv[U].sum()), "max_w": mw,
                                       "inside_view": inside}
        if not ok and self.raise_on_violation:
            raise OracleMisbehavior(f"oracle {self.name} broke the weight contract",
                                    dict(self.last_violation))
        return U

    def stats(self) -> dict:
        with self._lock:
            return {"calls": self.calls, "violations": self.violations,
                    "observed_s": self.observed_s}


# ---------------------------------------------------------------- estimator

def _random_connected_subset(graph: WeightedGraph, size: int, rng: np.random.Generator):
    start = int(rng.integers(graph.n))
    chosen = [start]
    members = {start}
    while len(chosen) < size:
        frontier = sorted({u for v in chosen for u, _ in graph.neighbors(v)} - members)
        if frontier:
            v = frontier[int(rng.integers(len(frontier)))]
        else:
            rest = sorted(set(range(graph.n)) - members)
            v = rest[int(rng.integers(len(rest)))]
        chosen.append(v)
        members.add(v)
    return np.asarray(sorted(members), dtype=np.int64)


def splitting_ratio(view: SubgraphView, weights, target: float, p: float, cap: int = 24) -> float:
    """Optimal cut over ``||c|W||_p`` for one (W, w, w*) triple (0 if the norm is 0)."""
    U = exhaustive_split(view, weights, target, cap=cap)
    norm = p_norm(view.costs, p)
    if norm == 0:
        return 0.0
    return boundary_cost(view, U, "view") / norm


def estimate_splittability(graph: WeightedGraph, p: float = 2.0, trials: int = 32,
                           seed: int = 0, cap: int = 10) -> float:
    """Lower estimate of the p-splittability from sampled views, weights and targets.

    The first trial uses the whole graph when it fits under ``cap``. Each
    sampled view is probed with unit weights at half the total and with a
    random weighting and target.
    """
    if graph.n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    best = 0.0
    for trial in range(trials):
        if trial == 0 and graph.n <= cap:
            W = np.arange(graph.n)
        else:
            size = int(rng.integers(1, min(graph.n, cap) + 1))
            W = _random_connected_subset(graph, size, rng)
        view = SubgraphView(graph, W)
        unit = np.ones(graph.n)
        best = max(best, splitting_ratio(view, unit, W.size / 2, p, cap))
        rw = rng.random(graph.n)
        tgt = float(rng.random()) * float(rw[W].sum())
        best = max(best, splitting_ratio(view, rw, tgt, p, cap))
    return best


# ---------------------------------------------------------------- factory

def make_oracle(name: str, graph: Optional[WeightedGraph] = None, p: Optional[float] = None,
                quality_s: float = 1.0) -> SplitOracle:
    """Build an oracle from its CLI name.

    ``p=None`` means 2 for the generic oracles and d/(d-1) for the grid oracle.
    """
    if name == "grid":
        from .grid import GridGraph, GridOracle
        if graph is None:
            raise ParameterError("the grid oracle needs the grid graph")
        return GridOracle(GridGraph(graph), quality_s=quality_s, p=p)
    p = 2.0 if p is None else p
    if name == "exhaustive":
        return ExhaustiveOracle(quality_s=quality_s, p=p)
    if name == "greedy":
        return GreedyOracle(quality_s=quality_s, p=p)
    if name.startswith("separator:"):
        key = name.split(":", 1)[1]
        if key not in SEPARATORS:
            raise ParameterError(f"unknown separator {key!r}; known: {sorted(SEPARATORS)}")
        return SeparatorOracle(SEPARATORS[key], key, quality_s=quality_s, p=p)
    raise ParameterError(f"unknown oracle {name!r}")
