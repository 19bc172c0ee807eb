"""Strictly balanced k-colorings by shrink-and-conquer.

The pipeline is ``balance_boundary`` (weakly balanced, small boundaries),
then a recursion that peels off an almost strictly balanced layer with
:func:`shrink` and glues the layers back with :func:`conquer_binpack1`, and
finally :func:`strictify_binpack2`, which moves a few small parts so that
every class meets the strict tolerance.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import checks
from .errors import InternalInvariantError, ParameterError
from .graph import (Coloring, SubgraphView, WeightedGraph, boundary_cost, class_boundaries,
                    class_sums, induced_size, is_strictly_balanced, max_weighted_degree, p_norm,
                    values_of)
from .multibalance import BoundaryReport, balance_boundary, holder_conjugate, realized_quality
from .oracles import SplitOracle, degree_measure, split_cost_measure


@dataclass(frozen=True)
class ShrinkConfig:
    """Constants of the shrink-and-conquer recursion.

    ``check_constants=False`` admits an epsilon for which the inequalities
    behind the analysis do not hold; the runtime checks still run.
    """

    epsilon: float = 0.1
    max_class_changes: Optional[int] = None
    conquer_slack: float = 4.0
    check_constants: bool = True

    def __post_init__(self):
        eps = self.epsilon
        if not 0 < eps < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.check_constants and not (1 - eps + 3 * eps ** 5 < 1 and 4 * eps < 0.5):
            raise ParameterError(f"epsilon={eps} is too large for the shrink analysis")
        if self.max_class_changes is not None and self.max_class_changes < 1:
            raise ParameterError("max_class_changes must be positive")
        if self.conquer_slack < 0:
            raise ParameterError("conquer_slack must be nonnegative")

    @property
    def M(self) -> float:
        return self.epsilon ** -5

    @property
    def changes(self) -> int:
        if self.max_class_changes is not None:
            return self.max_class_changes
        return math.ceil(2 / self.epsilon) + 2

    @property
    def shrink_cap(self) -> float:
        return max(self.M / self.epsilon, 2 / self.epsilon) + 1

    @property
    def sink_constants_hold(self) -> bool:
        """Whether both sink cases of the shrink analysis close for this epsilon."""
        eps = self.epsilon
        z = 1 - eps ** 10
        case_a = (1 - eps / 18) * (1 + 36 * eps ** 5) <= z
        case_b = (1 - 1 / 36) * (1 + 18 * eps) <= z
        return case_a and case_b


def cost_measure(graph: WeightedGraph, oracle: SplitOracle) -> np.ndarray:
    """Split cost measure for the oracle's (s, p); p = inf falls back to p = 2."""
    p = 2.0 if math.isinf(oracle.p) else oracle.p
    return split_cost_measure(graph, oracle.quality_s, p).values


def outside_cost(graph: WeightedGraph, U) -> np.ndarray:
    """phi(v) = cost of the edges from v in U to vertices outside U (host-length)."""
    inside = np.zeros(graph.n, dtype=bool)
    inside[np.asarray(U, dtype=np.int64)] = True
    e = graph.edges
    sel = inside[e[:, 0]] != inside[e[:, 1]]
    end = np.where(inside[e[sel, 0]], e[sel, 0], e[sel, 1])
    out = np.zeros(graph.n)
    np.add.at(out, end, graph.costs[sel])
    return out


# ---------------------------------------------------------------- partitions

def iterative_partition(view: SubgraphView, oracle: SplitOracle, psi, psi_star: float,
                        p: Optional[float] = None) -> List[np.ndarray]:
    """Cut ``W`` into parts of Psi-weight in ``[psi*, 3 psi*]`` by repeated splitting."""
    psi = values_of(psi)
    W = view.members
    total = float(psi[W].sum())
    top = float(psi[W].max()) if W.size else 0.0
    if total == 0:
        return [W.copy()]
    if not psi_star > 0:
        raise ParameterError("psi* must be positive")
    if top > psi_star:
        raise ParameterError(f"max Psi {top} exceeds psi* {psi_star}")
    if total < psi_star:
        raise ParameterError(f"Psi(W) = {total} is below psi* = {psi_star}")
    parts, calls = [], []
    rest = view
    while float(psi[rest.members].sum()) > 3 * psi_star:
        X = oracle.split(rest, psi, psi_star + top / 2)
        calls.append((rest, X))
        parts.append(X)
        rest = rest.sub(rest.complement(X))
    parts.append(rest.members)
    if checks.enabled("cheap"):
        _check_partition(view, oracle, psi, psi_star, parts, calls, total, p)
    return parts


def _check_partition(view, oracle, psi, psi_star, parts, calls, total, p):
    problems = []
    sizes = sum(X.size for X in parts)
    joined = np.unique(np.concatenate(parts))
    if sizes != view.members.size or not np.array_equal(joined, view.members):
        problems.append("parts do not partition W")
    for idx, X in enumerate(parts):
        val = float(psi[X].sum())
        if not (checks.le(psi_star, val, total) and checks.le(val, 3 * psi_star, total)):
            problems.append(f"part {idx} has Psi {val} outside [{psi_star}, {3 * psi_star}]")
    ell = len(parts)
    if not (checks.le(total / (3 * psi_star), ell, total) and checks.le(ell, total / psi_star, total)):
        problems.append(f"{ell} parts for Psi(W)={total}, psi*={psi_star}")
    p = oracle.p if p is None else p
    s = realized_quality(calls, p)
    labels = np.full(view.host.n, -1, dtype=np.int64)
    for idx, X in enumerate(parts):
        labels[X] = idx
    e = view.host.edges[view.edge_ids]
    cut = float(view.costs[labels[e[:, 0]] != labels[e[:, 1]]].sum())
    bound = ell * s * p_norm(view.costs, p) if math.isfinite(s) else math.inf
    if not checks.le(cut, bound, bound):
        problems.append(f"total cut {cut} > {bound}")
    checks.require(not problems, "iterative partition contract failed", problems=problems)


def _window(U_weight: float, psi_star: float, lo: float, hi: float, what: str):
    if not psi_star > 0:
        raise ParameterError("Psi* must be positive")
    ratio = U_weight / psi_star
    if not (checks.le(lo, ratio, hi) and checks.le(ratio, hi, hi)):
        raise ParameterError(f"{what} needs {lo} <= Psi(U)/Psi* <= {hi}, got {ratio}")


def _light_part(view, oracle, psi, phis, psi_star, eps, fraction):
    psi = values_of(psi)
    phis = [values_of(f) for f in phis]
    parts = iterative_partition(view, oracle, psi, eps * psi_star)
    U = view.members
    totals = [float(f[U].sum()) for f in phis]
    for X in parts:
        if all(checks.le(float(f[X].sum()), fraction * t, t) for f, t in zip(phis, totals)):
            if checks.enabled("cheap"):
                val = float(psi[X].sum()) / psi_star
                checks.require(checks.le(eps, val, 1) and checks.le(val, 3 * eps, 1),
                               "part leaves the Psi window", ratio=val, eps=eps)
            return X
    raise InternalInvariantError("no part passes the measure fractions",
                                 {"parts": len(parts), "fraction": fraction})


def cheap_part(view: SubgraphView, oracle: SplitOracle, psi, phis: Sequence, psi_star: float,
               eps: float, M: Optional[float] = None) -> np.ndarray:
    """Part of Psi-weight in [eps, 3 eps] Psi* carrying at most 6 r eps / M of every measure."""
    M = eps ** -5 if M is None else M
    psi = values_of(psi)
    _window(float(psi[view.members].sum()), psi_star, M / 2, M, "cheap_part")
    return _light_part(view, oracle, psi, phis, psi_star, eps, 6 * len(phis) * eps / M)


def costly_part(view: SubgraphView, oracle: SplitOracle, psi, phis: Sequence, psi_star: float,
                eps: float, M: Optional[float] = None) -> np.ndarray:
    """Like :func:`cheap_part` for lighter sets, with fraction 6 r eps."""
    M = eps ** -5 if M is None else M
    psi = values_of(psi)
    _window(float(psi[view.members].sum()), psi_star, 0.5, M, "costly_part")
    return _light_part(view, oracle, psi, phis, psi_star, eps, 6 * len(phis) * eps)


def heavy_part(view: SubgraphView, oracle: SplitOracle, psi, phis: Sequence, psi_star: float,
               eps: float, M: Optional[float] = None) -> np.ndarray:
    """Part of Psi-weight in [eps Psi*, eps Psi* + max Psi] carrying a fair share of every measure.

    The per-measure heaviest parts of a fine partition are united and topped
    up with one more split.
    """
    M = eps ** -5 if M is None else M
    psi = values_of(psi)
    phis = [values_of(f) for f in phis]
    U = view.members
    weight = float(psi[U].sum())
    _window(weight, psi_star, eps, M, "heavy_part")
    r = max(len(phis), 1)
    top = float(psi[U].max()) if U.size else 0.0
    goal = eps * psi_star
    if weight < goal + top / 2:
        X = U.copy()
    else:
        parts = iterative_partition(view, oracle, psi, goal / (3 * r))
        chosen = sorted({int(np.argmax([f[P].sum() for P in parts])) for f in phis})
        core = np.sort(np.concatenate([parts[i] for i in chosen])) if chosen else U[:0]
        rest = view.sub(view.complement(core))
        rest_top = float(psi[rest.members].max()) if rest.members.size else 0.0
        target = goal - float(psi[core].sum()) + rest_top / 2
        target = min(max(target, 0.0), float(psi[rest.members].sum()))
        S = oracle.split(rest, psi, target)
        X = np.union1d(core, S)
    if checks.enabled("cheap"):
        val = float(psi[X].sum())
        problems = []
        if not (checks.le(goal, val, weight) and checks.le(val, goal + top, weight)):
            problems.append(f"Psi(X) = {val} outside [{goal}, {goal + top}]")
        keep = 1 - eps / (3 * r) * psi_star / weight
        rest = np.setdiff1d(U, X, assume_unique=True)
        for j, f in enumerate(phis):
            tot = float(f[U].sum())
            if not checks.le(float(f[rest].sum()), keep * tot, tot):
                problems.append(f"measure {j} keeps more than {keep} of its weight")
        checks.require(not problems, "heavy_part contract failed", problems=problems)
    return X


# ---------------------------------------------------------------- shrink

@dataclass
class Part:
    vertices: np.ndarray
    origin: int
    kind: str  # "cheap" or "costly"


@dataclass
class ShrinkTrace:
    k: int = 0
    epsilon: float = 0.0
    psi_star: float = 0.0
    max_weight: float = 0.0
    events: List[tuple] = field(default_factory=list)
    source: set = field(default_factory=set)
    sink: set = field(default_factory=set)
    changes: Optional[np.ndarray] = None
    received: Dict[int, List[str]] = field(default_factory=dict)
    before_carve: Optional[np.ndarray] = None
    chi0_weights: Optional[np.ndarray] = None
    chi1_weights: Optional[np.ndarray] = None
    size_in: int = 0
    size_out: int = 0
    pi_max_in: float = 0.0
    pi_max_out: Optional[np.ndarray] = None
    boundary_max_in: float = 0.0
    boundary_out: Optional[np.ndarray] = None
    cut_budget: Optional[np.ndarray] = None
    violations: List[str] = field(default_factory=list)

    @property
    def cutdowns(self) -> int:
        return sum(1 for ev in self.events if ev[0] == "cutdown")


def shrink(chi: Coloring, oracle: SplitOracle, config: ShrinkConfig = ShrinkConfig(),
           trace: Optional[ShrinkTrace] = None):
    """Split a weakly balanced coloring of W into (chi0 on W0, chi1 on W1).

    chi0 is almost strictly balanced with every class just above eps times
    the average; chi1 keeps the rest and is cheaper than chi in every tracked
    measure.
    """
    graph, k = chi.graph, chi.k
    psi = chi.weights
    eps, M = config.epsilon, config.M
    W = chi.domain
    psi_star = float(psi[W].sum()) / k
    top = float(psi[W].max()) if W.size else 0.0
    if not psi_star > 0:
        raise ParameterError("shrink needs positive average weight")
    start_weights = class_sums(chi.colors, psi, k)
    if not checks.le(float(start_weights.max()), M * psi_star, psi_star):
        raise ParameterError("shrink needs max class weight <= M * average")
    if not checks.le(top, eps ** 5 * psi_star, psi_star):
        raise ParameterError("shrink needs max weight <= eps^5 * average")

    tr = trace if trace is not None else ShrinkTrace()
    tr.k, tr.epsilon, tr.psi_star, tr.max_weight = k, eps, psi_star, top
    pi = cost_measure(graph, oracle)
    deg = degree_measure(SubgraphView(graph, W))
    colors = chi.colors.copy()
    tw = start_weights.copy()
    tol = checks.rel(float(psi[W].sum()))
    changes = np.zeros(k, dtype=np.int64)
    budget = np.zeros(k)
    received: Dict[int, List[str]] = {}
    buffer: deque = deque()

    def measures(U):
        return [pi, deg, outside_cost(graph, U)]

    def take(i, extractor, kind):
        U = np.flatnonzero(colors == i)
        view = SubgraphView(graph, U)
        X = extractor(view, oracle, psi, measures(U), psi_star, eps, M)
        budget[i] += boundary_cost(view, X, "view")
        colors[X] = -1
        tw[i] = float(psi[colors == i].sum())
        changes[i] += 1
        tr.source.add(i)
        return Part(X, i, kind)

    def paint(part, j):
        colors[part.vertices] = j
        tw[j] = float(psi[colors == j].sum())
        changes[j] += 1
        tr.sink.add(j)
        received.setdefault(j, []).append(part.kind)

    # CutDown until no class is above M/2 * Psi*
    while True:
        over = np.flatnonzero(tw > M / 2 * psi_star + tol)
        if over.size == 0:
            break
        i = int(over[0])
        part = take(i, cheap_part, "cheap")
        buffer.append(part)
        tr.events.append(("cutdown", i, int(part.vertices.size)))
    # AddTo every class below eps * Psi*
    for j in range(k):
        if tw[j] < eps * psi_star - tol:
            if buffer:
                part = buffer.popleft()
            else:
                donors = np.flatnonzero(tw >= psi_star / 2 - tol)
                if donors.size == 0:
                    raise InternalInvariantError("no donor color for AddTo", {"color": j})
                part = take(int(donors[0]), costly_part, "costly")
            paint(part, j)
            tr.events.append(("addto", j, part.origin, part.kind))
    # ReduceBuffer
    while buffer:
        part = buffer.popleft()
        light = np.flatnonzero(tw <= psi_star + tol)
        if light.size == 0:
            raise InternalInvariantError("no color at or below average for ReduceBuffer", {})
        paint(part, int(light[0]))
        tr.events.append(("reduce", int(light[0]), part.origin))

    tr.before_carve = tw.copy()
    if checks.enabled("cheap"):
        problems = []
        if np.any(colors[W] < 0):
            problems.append("coloring is not total before carving")
        if not (checks.le(eps * psi_star, float(tw.min()), psi_star)
                and checks.le(float(tw.max()), M / 2 * psi_star, psi_star)):
            problems.append(f"class weights {tw.min()}..{tw.max()} leave [eps, M/2] * Psi*")
        checks.require(not problems, "shrink state before carving is invalid", internal=True,
                       problems=problems)

    # carve X_i from every class
    W0_parts = []
    for i in range(k):
        U = np.flatnonzero(colors == i)
        view = SubgraphView(graph, U)
        X = heavy_part(view, oracle, psi, measures(U), psi_star, eps, M)
        budget[i] += boundary_cost(view, X, "view")
        W0_parts.append(X)
    W0 = np.sort(np.concatenate(W0_parts))
    in0 = np.zeros(graph.n, dtype=bool)
    in0[W0] = True
    colors0 = np.where(in0, colors, -1)
    colors1 = np.where(in0, -1, colors)
    chi0 = Coloring(graph, k, colors0, psi)
    chi1 = Coloring(graph, k, colors1, psi)

    tr.changes = changes
    tr.received = received
    tr.cut_budget = budget
    tr.chi0_weights = chi0.class_weights.copy()
    tr.chi1_weights = chi1.class_weights.copy()
    tr.size_in = induced_size(graph, W)
    tr.size_out = induced_size(graph, chi1.domain)
    tr.pi_max_in = float(class_sums(chi.colors, pi, k).max())
    tr.pi_max_out = class_sums(colors1, pi, k)
    tr.boundary_max_in = float(class_boundaries(graph, chi.colors, k).max())
    tr.boundary_out = chi1.class_boundary.copy()
    tr.violations.extend(shrink_problems(tr, config))
    if checks.enabled("cheap"):
        checks.require(not tr.violations, "shrink contract failed", violations=tr.violations[:10])
    return chi0, chi1


def shrink_problems(tr: ShrinkTrace, config: ShrinkConfig) -> List[str]:
    eps, M = config.epsilon, config.M
    z = 1 - eps ** 10
    problems = []
    for i, val in enumerate(tr.chi0_weights):
        extra = float(val) - eps * tr.psi_star
        if not (checks.le(0.0, extra, tr.psi_star) and checks.le(extra, tr.max_weight, tr.psi_star)):
            problems.append(f"chi0 class {i} is {extra} above eps * Psi*")
    avg1 = float(tr.chi1_weights.sum()) / tr.k
    if not checks.le(float(tr.chi1_weights.max()), M * avg1, avg1):
        problems.append("chi1 is not weakly balanced")
    if not tr.size_out <= z * tr.size_in + 1e-9:
        problems.append(f"|G[W1]| = {tr.size_out} > (1 - eps^10) * {tr.size_in}")
    both = tr.source & tr.sink
    if both:
        problems.append(f"colors {sorted(both)} are both source and sink")
    if tr.changes is not None and tr.changes.max(initial=0) > config.shrink_cap:
        problems.append(f"a class changed {int(tr.changes.max())} times")
    check_sinks = config.sink_constants_hold
    for i in range(tr.k):
        if i in tr.sink and not check_sinks:
            continue
        bound = z * tr.pi_max_in
        if not checks.le(float(tr.pi_max_out[i]), bound, bound):
            problems.append(f"chi1 class {i} keeps pi {tr.pi_max_out[i]} > {bound}")
        if i not in tr.sink:
            bound = z * tr.boundary_max_in + float(tr.cut_budget[i])
            if not checks.le(float(tr.boundary_out[i]), bound, bound):
                problems.append(f"chi1 class {i} has boundary {tr.boundary_out[i]} > {bound}")
    return problems


# ---------------------------------------------------------------- bin packing

@dataclass
class PackTrace:
    name: str = ""
    average: float = 0.0
    max_weight: float = 0.0
    slack: float = 0.0
    cap: float = 0.0
    degenerate: bool = False
    emitted: Optional[np.ndarray] = None
    received: Optional[np.ndarray] = None
    events: List[tuple] = field(default_factory=list)
    boundary_in: float = 0.0
    boundary_out: float = 0.0
    pi_max: float = 0.0
    pi_root: float = 0.0
    max_degree_cost: float = 0.0
    violations: List[str] = field(default_factory=list)

    @property
    def changes(self) -> np.ndarray:
        return self.emitted + self.received

    @property
    def growth_constant(self) -> float:
        """(out max boundary - in max boundary) / (pi^(1/p) + Delta_c), 0 if the scale is 0."""
        scale = self.pi_root + self.max_degree_cost
        return max(self.boundary_out - self.boundary_in, 0.0) / scale if scale > 0 else 0.0


def _pack_part(view: SubgraphView, w: np.ndarray, lo: float, hi: float, oracle: SplitOracle):
    """Part X of the view with lo <= w(X) <= hi (the whole view if it is light enough)."""
    U = view.members
    total = float(w[U].sum())
    if total <= hi:
        return U.copy()
    return oracle.split(view, w, (lo + hi) / 2)


def conquer_binpack1(chi0: Coloring, chi1: Optional[Coloring], oracle: SplitOracle,
                     config: ShrinkConfig = ShrinkConfig(), max_weight: Optional[float] = None,
                     strict_pre: bool = True, trace: Optional[PackTrace] = None) -> Coloring:
    """Recolor parts of chi0 so that chi0 (+) chi1 is almost strictly balanced.

    Returns the new coloring of W0. With ``strict_pre=False`` the weight
    preconditions are only recorded, which the pipeline uses for its base case.
    """
    graph, k = chi0.graph, chi0.k
    w = chi0.weights
    W0 = chi0.domain
    W1 = chi1.domain if chi1 is not None else W0[:0]
    if chi1 is not None and (chi1.k != k or np.intersect1d(W0, W1).size):
        raise ParameterError("conquer needs two k-colorings of disjoint sets")
    w1 = class_sums(chi1.colors, w, k) if chi1 is not None else np.zeros(k)
    mw = float(w[np.concatenate([W0, W1])].max(initial=0.0)) if max_weight is None else max_weight
    wstar = (float(w[W0].sum()) + float(w[W1].sum())) / k
    colors = chi0.colors.copy()
    tw = class_sums(colors, w, k)
    tol = checks.rel(wstar * k)
    tr = trace if trace is not None else PackTrace()
    tr.name, tr.average, tr.max_weight = "binpack1", wstar, mw
    tr.emitted = np.zeros(k, dtype=np.int64)
    tr.received = np.zeros(k, dtype=np.int64)
    tr.boundary_in = float(chi0.class_boundary.max())
    if mw == 0:
        return chi0.copy()

    pre_ok = bool(np.all(w1 <= wstar - mw + checks.slack(wstar)))
    avg0, avg1 = float(w[W0].sum()) / k, float(w[W1].sum()) / k
    near = (np.all(np.abs(tw - avg0) <= config.conquer_slack * mw + checks.slack(wstar))
            and np.all(np.abs(w1 - avg1) <= config.conquer_slack * mw + checks.slack(wstar)))
    if strict_pre and not (pre_ok and near):
        raise ParameterError("conquer needs w1(i) <= w* - max w and classes near their averages")
    tr.degenerate = not pre_ok
    tr.slack = float(np.abs(tw + w1 - wstar).max()) / mw
    tr.cap = max(config.changes, math.ceil(tr.slack) + 3)
    buffer: deque = deque()

    def refresh(i):
        tw[i] = float(w[colors == i].sum())

    # cut parts off classes that are above the average
    while True:
        over = np.flatnonzero(tw + w1 > wstar + tol)
        over = over[tw[over] > 0]
        if over.size == 0:
            break
        i = int(over[0])
        U = np.flatnonzero(colors == i)
        if pre_ok and checks.enabled("cheap"):
            checks.require(checks.le(mw, float(tw[i]), wstar), "class above average is lighter than max w",
                           internal=True, color=i, weight=float(tw[i]))
        X = _pack_part(SubgraphView(graph, U), w, mw, 2 * mw, oracle)
        colors[X] = -1
        refresh(i)
        buffer.append(X)
        tr.emitted[i] += 1
        tr.events.append(("emit", i, float(w[X].sum())))
    # fill classes far below the average
    while True:
        if checks.enabled("cheap"):
            checks.require(bool(np.all(tw + w1 <= wstar + checks.slack(wstar))),
                           "a class exceeds the average while filling", internal=True)
        under = np.flatnonzero(tw + w1 < wstar - 2 * mw - tol)
        if under.size == 0:
            break
        if not buffer:
            raise InternalInvariantError("buffer empty while a class is light",
                                         {"color": int(under[0])})
        i = int(under[0])
        X = buffer.popleft()
        colors[X] = i
        refresh(i)
        tr.received[i] += 1
        tr.events.append(("fill", i, float(w[X].sum())))
    # place the rest greedily
    while buffer:
        X = buffer.popleft()
        i = int(np.argmin(tw + w1))
        if not checks.le(float(tw[i] + w1[i]), wstar, wstar):
            raise InternalInvariantError("no class at or below average", {"part": int(X.size)})
        colors[X] = i
        refresh(i)
        tr.received[i] += 1
        tr.events.append(("place", i, float(w[X].sum())))

    out = Coloring(graph, k, colors, w)
    tr.boundary_out = float(out.class_boundary.max())
    if checks.enabled("cheap"):
        dev = np.abs(out.class_weights + w1 - wstar)
        if not np.all(dev <= 2 * mw + checks.slack(wstar)):
            tr.violations.append(f"direct sum deviates {dev.max()} > 2 max w = {2 * mw}")
        if not tr.degenerate and (tr.emitted + tr.received).max() > tr.cap:
            tr.violations.append(f"a class changed {(tr.emitted + tr.received).max()} times > {tr.cap}")
        checks.require(not tr.violations, "conquer guarantee failed", violations=tr.violations)
    return out


def strictify_binpack2(chi: Coloring, oracle: SplitOracle, config: ShrinkConfig = ShrinkConfig(),
                       trace: Optional[PackTrace] = None) -> Coloring:
    """Turn an almost strictly balanced coloring into a strictly balanced one."""
    graph, k = chi.graph, chi.k
    w = chi.weights
    dom = chi.domain
    tr = trace if trace is not None else PackTrace()
    tr.name = "binpack2"
    tr.emitted = np.zeros(k, dtype=np.int64)
    tr.received = np.zeros(k, dtype=np.int64)
    tr.boundary_in = tr.boundary_out = float(chi.class_boundary.max()) if k else 0.0
    mw = float(w[dom].max()) if dom.size else 0.0
    wstar = float(w[dom].sum()) / k
    tr.average, tr.max_weight = wstar, mw
    pi = cost_measure(graph, oracle)
    pexp = 2.0 if math.isinf(oracle.p) else oracle.p
    tr.pi_max = float(class_sums(chi.colors, pi, k).max())
    tr.pi_root = tr.pi_max ** (1.0 / pexp)
    tr.max_degree_cost = max_weighted_degree(graph)
    if k == 1 or mw == 0:
        return chi.copy()
    tw = class_sums(chi.colors, w, k)
    tol = checks.rel(wstar * k)
    if not np.all(np.abs(tw - wstar) <= 2 * mw + checks.slack(wstar)):
        raise ParameterError("strictify needs an almost strictly balanced coloring")
    tr.degenerate = wstar < mw / 2
    tr.slack = float(np.abs(tw - wstar).max()) / mw
    tr.cap = config.changes
    colors = chi.colors.copy()
    buffer: deque = deque()

    def refresh(i):
        tw[i] = float(w[colors == i].sum())

    def claim_part(U, excess):
        # aim at the excess so the class lands near w*; fall back to one heavy vertex
        total = float(w[U].sum())
        if total <= mw + tol:
            return U.copy()
        view = SubgraphView(graph, U)
        X = np.asarray(oracle.split(view, w, min(max(excess, mw / 2), mw)), dtype=np.int64)
        if checks.le(mw / 2, float(w[X].sum()), mw) and checks.le(float(w[X].sum()), mw, mw):
            return X
        heavy = U[w[U] >= mw / 2]
        if heavy.size:
            return heavy[:1].copy()
        return _pack_part(view, w, mw / 2, mw, oracle)

    if is_strictly_balanced(chi):
        return chi.copy()
    while True:
        over = np.flatnonzero(tw > wstar + tol)
        if over.size == 0:
            break
        i = int(over[0])
        X = claim_part(np.flatnonzero(colors == i), float(tw[i]) - wstar)
        if not tr.degenerate and checks.enabled("cheap"):
            wx = float(w[X].sum())
            checks.require(checks.le(mw / 2, wx, mw) and checks.le(wx, mw, mw),
                           "strictify part leaves [max w / 2, max w]", internal=True, weight=wx)
        colors[X] = -1
        refresh(i)
        buffer.append(X)
        tr.emitted[i] += 1
        tr.events.append(("emit", i, float(w[X].sum())))
    low = wstar - (1 - 1 / k) * mw
    while True:
        if checks.enabled("cheap"):
            checks.require(bool(np.all(tw <= wstar + mw / k + checks.slack(wstar))),
                           "a class exceeds w* + max w / k while filling", internal=True)
        under = np.flatnonzero(tw < low - tol)
        if under.size == 0:
            break
        if not buffer:
            raise InternalInvariantError("buffer empty while a class is light", {"color": int(under[0])})
        i = int(under[0])
        X = buffer.popleft()
        colors[X] = i
        refresh(i)
        tr.received[i] += 1
        tr.events.append(("fill", i, float(w[X].sum())))
    while buffer:
        X = buffer.popleft()
        i = int(np.argmin(tw))
        wx = float(w[X].sum())
        if not checks.le(float(tw[i]), wstar - wx / k, wstar):
            raise InternalInvariantError("no class light enough for a buffered part", {"part": wx})
        colors[X] = i
        refresh(i)
        tr.received[i] += 1
        tr.events.append(("place", i, wx))

    out = Coloring(graph, k, colors, w)
    tr.boundary_out = float(out.class_boundary.max())
    report = is_strictly_balanced(out)
    if not report:
        raise InternalInvariantError("strictify output is not strictly balanced",
                                     {"deviations": report.deviations.tolist()})
    if checks.enabled("cheap") and not tr.degenerate and tr.changes.max() > tr.cap:
        tr.violations.append(f"a class changed {tr.changes.max()} times > {tr.cap}")
        checks.require(False, "strictify changed a class too often", violations=tr.violations)
    return out


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineReport:
    k: int = 0
    epsilon: float = 0.0
    boundary: Optional[BoundaryReport] = None
    shrink_traces: List[ShrinkTrace] = field(default_factory=list)
    conquer_traces: List[PackTrace] = field(default_factory=list)
    strictify: Optional[PackTrace] = None
    stage_max_boundary: Dict[str, float] = field(default_factory=dict)
    max_boundary: float = 0.0
    avg_boundary: float = 0.0
    reference: float = 0.0
    eq1_slack: float = 0.0

    @property
    def shrink_depth(self) -> int:
        return len(self.shrink_traces)

    @property
    def boundary_ratio(self) -> float:
        return self.max_boundary / self.reference if self.reference > 0 else 0.0


def reference_bound(graph: WeightedGraph, oracle: SplitOracle, k: int) -> float:
    """s * (q * k^(-1/p) * ||c||_p + Delta_c), the scale the boundary costs are compared with."""
    p = oracle.p
    return oracle.quality_s * (holder_conjugate(p) * k ** (-1.0 / p) * p_norm(graph.costs, p)
                               + max_weighted_degree(graph))


def partition(graph: WeightedGraph, weights=None, oracle: Optional[SplitOracle] = None, k: int = 2,
              p: Optional[float] = None, config: Optional[ShrinkConfig] = None,
              report: Optional[PipelineReport] = None) -> Coloring:
    """Strictly balanced k-coloring with small maximum boundary cost."""
    from .oracles import GreedyOracle

    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ParameterError("k must be a positive integer")
    k = int(k)
    config = ShrinkConfig() if config is None else config
    oracle = GreedyOracle() if oracle is None else oracle
    g = graph if weights is None else graph.with_weights(weights)
    rep = report if report is not None else PipelineReport()
    rep.k, rep.epsilon = k, config.epsilon
    rep.reference = reference_bound(g, oracle, k) if g.m else 0.0
    if k == 1:
        out = Coloring(g, 1, np.zeros(g.n, dtype=np.int64))
        rep.eq1_slack = is_strictly_balanced(out).slack
        return out
    w = g.weights
    mw = float(w.max()) if g.n else 0.0

    rep.boundary = BoundaryReport()
    chi = balance_boundary(g, oracle, [w], k, p, report=rep.boundary)
    rep.stage_max_boundary["balance"] = float(chi.class_boundary.max())

    layers = []
    cur = chi
    eps5 = config.epsilon ** 5
    while True:
        W = cur.domain
        avg = float(w[W].sum()) / k
        if avg == 0 or mw > eps5 * avg + checks.rel(avg):
            break
        tr = ShrinkTrace()
        chi0, cur = shrink(cur, oracle, config, trace=tr)
        rep.shrink_traces.append(tr)
        layers.append(chi0)
    base = PackTrace()
    hat = conquer_binpack1(cur, None, oracle, config, max_weight=mw, strict_pre=False, trace=base)
    rep.conquer_traces.append(base)
    while layers:
        chi0 = layers.pop()
        tr = PackTrace()
        fixed = conquer_binpack1(chi0, hat, oracle, config, max_weight=mw, trace=tr)
        rep.conquer_traces.append(tr)
        hat = fixed.direct_sum(hat)
    rep.stage_max_boundary["almost"] = float(hat.class_boundary.max())

    rep.strictify = PackTrace()
    out = strictify_binpack2(hat, oracle, config, trace=rep.strictify)
    rep.max_boundary = float(out.class_boundary.max())
    rep.avg_boundary = float(out.class_boundary.mean())
    rep.stage_max_boundary["strict"] = rep.max_boundary
    balance = is_strictly_balanced(out)
    rep.eq1_slack = balance.slack
    if not balance:
        raise InternalInvariantError("partition output is not strictly balanced",
                                     {"deviations": balance.deviations.tolist()})
    return out
