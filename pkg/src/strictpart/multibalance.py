"""Colorings that are balanced with respect to several vertex measures at once.

``multibalcut`` 2-colors a view for a stack of measures, ``move_rebalance``
repairs one measure of a k-coloring while keeping the others under control,
``multibalance`` applies it measure by measure, and ``balance_boundary``
additionally balances the boundary cost of the classes.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import checks
from .errors import ParameterError
from .graph import (Coloring, SubgraphView, WeightedGraph, boundary_cost,
                    p_norm, values_of)
from .oracles import EMPTY, SplitOracle, split_cost_measure

MAX_MEASURES = 8


def holder_conjugate(p: float) -> float:
    return 1.0 if math.isinf(p) else p / (p - 1.0)


# ---------------------------------------------------------------- multibalcut

def multibalcut(view: SubgraphView, oracle: SplitOracle, measures: Sequence,
                p: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """2-color ``W`` so that both classes carry about half of every measure.

    The last measure is split first; the halves are colored recursively with
    the remaining measures and oriented so that each half gives its lighter
    part (in the last measure) to its own class.
    """
    stack = [values_of(m) for m in measures]
    if not stack:
        raise ParameterError("multibalcut needs at least one measure")
    if len(stack) > MAX_MEASURES:
        raise ParameterError(f"at most {MAX_MEASURES} measures are supported")
    calls: List[Tuple[SubgraphView, np.ndarray]] = []
    A, B = _multibalcut(view, oracle, stack, calls)
    if checks.enabled("cheap"):
        _check_multibalcut(view, oracle, stack, A, B, calls, p)
    return A, B


def _multibalcut(view, oracle, stack, calls):
    if view.members.size == 0:
        return EMPTY, EMPTY
    phi = stack[-1]
    U1 = oracle.split(view, phi, float(phi[view.members].sum()) / 2)
    U2 = view.complement(U1)
    calls.append((view, U1))
    if len(stack) == 1:
        return U1, U2
    a1, b1 = _multibalcut(view.sub(U1), oracle, stack[:-1], calls)
    a2, b2 = _multibalcut(view.sub(U2), oracle, stack[:-1], calls)
    if phi[a1].sum() > phi[b1].sum():
        a1, b1 = b1, a1
    if phi[b2].sum() > phi[a2].sum():
        a2, b2 = b2, a2
    return np.union1d(a1, a2), np.union1d(b1, b2)


def realized_quality(calls, p: float) -> float:
    """Largest cut / ||c|W'||_p over the recorded oracle calls."""
    s = 0.0
    for sub, U in calls:
        cut = boundary_cost(sub, U, "view")
        norm = p_norm(sub.costs, p)
        if norm > 0:
            s = max(s, cut / norm)
        elif cut > 0:
            return math.inf
    return s


def multibalcut_bounds(view, stack, A, B, s: float, p: float) -> List[str]:
    """Check the three guarantees of ``multibalcut``; return the failures."""
    r = len(stack)
    W = view.members
    problems = []
    for j, phi in enumerate(stack, start=1):
        total = float(phi[W].sum())
        top = float(phi[W].max()) if W.size else 0.0
        if j == 1:
            bound = 0.5 * (total + 2 ** (r - 1) * top)
        else:
            bound = 0.75 * (total + 2 ** (r - j) * top)
        for name, cls in (("first", A), ("second", B)):
            val = float(phi[cls].sum())
            if not checks.le(val, bound, total):
                problems.append(f"measure {j} of {name} class {val} > {bound}")
    cut = boundary_cost(view, A, "view")
    limit = (2 ** r - 1) * s * p_norm(view.costs, p)
    if not checks.le(cut, limit, limit):
        problems.append(f"cut {cut} > {limit}")
    return problems


def _check_multibalcut(view, oracle, stack, A, B, calls, p):
    p = oracle.p if p is None else p
    s = realized_quality(calls, p)
    problems = multibalcut_bounds(view, stack, A, B, s, p)
    checks.require(not problems, "multibalcut guarantee failed", problems=problems)


# ---------------------------------------------------------------- move_rebalance

@dataclass
class MoveSnapshot:
    color: int
    kind: str
    tent_psi: np.ndarray
    status: List[str]
    tent_sets: Optional[List[np.ndarray]] = None
    tent_sizes: Optional[np.ndarray] = None


@dataclass
class RebalanceTrace:
    """Everything needed to re-verify a ``move_rebalance`` run from the outside."""

    k: int = 0
    r: int = 0
    avg: float = 0.0
    max_value: float = 0.0
    heavy_threshold: float = 0.0
    domain_size: int = 0
    initial: List[np.ndarray] = field(default_factory=list)
    final: List[np.ndarray] = field(default_factory=list)
    parent: Dict[int, int] = field(default_factory=dict)
    children: Dict[int, List[int]] = field(default_factory=dict)
    depth: Dict[int, int] = field(default_factory=dict)
    v_in: Dict[int, np.ndarray] = field(default_factory=dict)
    v_out: Dict[int, np.ndarray] = field(default_factory=dict)
    x_sets: Dict[int, np.ndarray] = field(default_factory=dict)
    splits: Dict[int, np.ndarray] = field(default_factory=dict)
    dynamic: Dict[int, np.ndarray] = field(default_factory=dict)
    snapshots: List[MoveSnapshot] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)
    keep_sets: bool = True

    @property
    def heavy_moves(self) -> int:
        return len(self.v_out)


def classify(tent_psi: np.ndarray, avg: float, heavy: float) -> List[str]:
    return ["light" if x < avg else ("heavy" if x >= heavy else "medium") for x in tent_psi.tolist()]


def state_problems(tent_psi, status, avg, heavy) -> List[str]:
    """Invariant 2 and the light/heavy counting claim for one snapshot."""
    kinds = classify(np.asarray(tent_psi), avg, heavy)
    problems = []
    for i, (kind, st) in enumerate(zip(kinds, status)):
        if kind == "light" and st != "untouched":
            problems.append(f"light color {i} is {st}")
        if kind == "heavy" and st != "pending":
            problems.append(f"heavy color {i} is {st}")
        if st == "finished" and kind != "medium":
            problems.append(f"finished color {i} is {kind}")
    n_light = kinds.count("light")
    n_heavy = kinds.count("heavy")
    if n_light < 2 * n_heavy:
        problems.append(f"{n_light} light colors for {n_heavy} heavy ones")
    return problems


def move_rebalance(graph: WeightedGraph, oracle: SplitOracle, chi: Coloring, target,
                   others: Sequence = (), p: Optional[float] = None,
                   dynamic: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
                   trace: Optional[RebalanceTrace] = None) -> Coloring:
    """Rebalance ``chi`` with respect to ``target`` (Psi) by moving vertex sets.

    Heavy classes keep a part of Psi-weight in ``[avg, avg + max]`` and hand
    the rest, 2-colored by :func:`multibalcut` over ``[Psi] + others`` (plus
    the optional dynamic measure), to the two lowest-id light classes.
    """
    p = oracle.p if p is None else p
    psi = values_of(target)
    others = [values_of(m) for m in others]
    k = chi.k
    dom = chi.domain
    r = 1 + len(others) + (1 if dynamic is not None else 0)
    if r > MAX_MEASURES:
        raise ParameterError(f"at most {MAX_MEASURES} measures are supported")
    avg = float(psi[dom].sum()) / k
    mx = float(psi[dom].max()) if dom.size else 0.0
    heavy_thr = 3 * avg + 2 ** r * mx
    initial = chi.classes()
    full = checks.enabled("full")
    cheap = checks.enabled("cheap")
    record = trace if trace is not None else (RebalanceTrace(keep_sets=False) if cheap else None)
    if record is not None:
        record.k, record.r, record.avg, record.max_value = k, r, avg, mx
        record.heavy_threshold = heavy_thr
        record.domain_size = int(dom.size)
        record.initial = [c.copy() for c in initial]
    if mx == 0:
        if record is not None:
            record.final = [c.copy() for c in initial]
        return chi.copy()

    tent = list(initial)
    tent_psi = np.array([psi[c].sum() for c in tent])
    status = ["untouched"] * k
    pending = deque()
    for i in range(k):
        if tent_psi[i] >= heavy_thr:
            status[i] = "pending"
            pending.append(i)
    v_in: Dict[int, np.ndarray] = {}
    v_out: Dict[int, np.ndarray] = {}
    x_sets: Dict[int, np.ndarray] = {}
    parent: Dict[int, int] = {}
    depth = {i: 0 for i in range(k)}
    finished: Dict[int, np.ndarray] = {}
    stack_static = [psi] + others

    while pending:
        i = pending.popleft()
        X = tent[i]
        x_sets[i] = X
        if tent_psi[i] < heavy_thr:
            finished[i] = X
            status[i] = "finished"
            kind = "medium"
        else:
            light = [j for j in range(k) if tent_psi[j] < avg]
            checks.require(len(light) >= 2, "fewer than two light colors for a heavy move",
                           internal=True, color=i, light=light)
            x1, x2 = light[0], light[1]
            view = SubgraphView(graph, X)
            U = oracle.split(view, psi, avg + mx / 2)
            if cheap:
                wU = float(psi[U].sum())
                checks.require(checks.le(avg, wU, avg) and checks.le(wU, avg + mx, avg),
                               "kept part leaves [avg, avg + max]", weight=wU, avg=avg, max=mx)
            rest = view.complement(U)
            stack = list(stack_static)
            if dynamic is not None:
                dyn = np.asarray(dynamic(i, v_in.get(i, EMPTY)), dtype=np.float64)
                stack.append(dyn)
                if record is not None:
                    record.dynamic[i] = dyn
            A, B = multibalcut(view.sub(rest), oracle, stack, p)
            v_out[i] = rest
            v_in[x1], v_in[x2] = A, B
            tent[i] = U
            tent[x1] = np.union1d(tent[x1], A)
            tent[x2] = np.union1d(tent[x2], B)
            tent_psi[i] = psi[U].sum()
            tent_psi[x1] = psi[tent[x1]].sum()
            tent_psi[x2] = psi[tent[x2]].sum()
            finished[i] = U
            status[i] = "finished"
            for x in (x1, x2):
                parent[x] = i
                depth[x] = depth[i] + 1
                status[x] = "pending"
                pending.append(x)
            if record is not None:
                record.splits[i] = U
            kind = "heavy"
        if record is not None:
            snap = MoveSnapshot(i, kind, tent_psi.copy(), list(status))
            if record.keep_sets:
                snap.tent_sets = [t.copy() for t in tent]
            else:
                snap.tent_sizes = np.array([t.size for t in tent])
            record.snapshots.append(snap)
            problems = state_problems(tent_psi, status, avg, heavy_thr)
            if full or record.keep_sets:
                cover = np.sort(np.concatenate(tent)) if tent else EMPTY
                if not np.array_equal(cover, dom):
                    problems.append("tentative classes do not partition the domain")
            elif sum(t.size for t in tent) != dom.size:
                problems.append("tentative class sizes do not add up")
            record.violations.extend(f"after move of {i}: {msg}" for msg in problems)

    final = [finished.get(i, tent[i]) for i in range(k)]
    colors = np.full(graph.n, -1, dtype=np.int64)
    for i, cls in enumerate(final):
        colors[cls] = i
    out = Coloring(graph, k, colors, chi.weights)

    if record is not None:
        record.final = [c.copy() for c in final]
        record.parent, record.depth = parent, depth
        record.v_in, record.v_out, record.x_sets = v_in, v_out, x_sets
        record.children = {}
        for x, i in parent.items():
            record.children.setdefault(i, []).append(x)
        record.violations.extend(rebalance_problems(record, psi, stack_static[1:]))
        checks.require(not record.violations, "move_rebalance invariant failed",
                       internal=True, violations=record.violations[:10])
    return out


def rebalance_problems(tr: RebalanceTrace, psi: np.ndarray, others: Sequence[np.ndarray]) -> List[str]:
    """Post-run checks of a rebalance trace (claims on balance, flow and the forest)."""
    problems = []
    avg, mx, r = tr.avg, tr.max_value, tr.r
    final_psi = [float(psi[c].sum()) for c in tr.final]
    if final_psi and not checks.le(max(final_psi), tr.heavy_threshold, tr.heavy_threshold):
        problems.append(f"final max Psi {max(final_psi)} exceeds {tr.heavy_threshold}")
    for j, phi in enumerate(others, start=2):
        top = float(phi.max()) if phi.size else 0.0
        before = max(float(phi[c].sum()) for c in tr.initial)
        after = max(float(phi[c].sum()) for c in tr.final)
        bound = 4 * before + 3 * 2 ** r * top
        if not checks.le(after, bound, bound):
            problems.append(f"measure {j} grew from {before} to {after} > {bound}")
    for i in tr.x_sets:
        lhs = np.sort(np.concatenate([tr.initial[i], tr.v_in.get(i, EMPTY)]))
        rhs = np.sort(np.concatenate([tr.final[i], tr.v_out.get(i, EMPTY)]))
        if not np.array_equal(lhs, rhs):
            problems.append(f"conservation fails for color {i}")
    for i, out in tr.v_out.items():
        kids = tr.children.get(i, [])
        parts = [tr.v_in[x] for x in kids]
        joined = np.sort(np.concatenate(parts)) if parts else EMPTY
        if len(kids) != 2 or not np.array_equal(joined, np.sort(out)):
            problems.append(f"V_out({i}) is not the disjoint union of its children's V_in")
    for x, i in tr.parent.items():
        if x in tr.x_sets and i in tr.x_sets:
            ex_x = float(psi[tr.x_sets[x]].sum()) - avg
            ex_i = float(psi[tr.x_sets[i]].sum()) - avg
            bound = ex_i / 2 + 2.0 ** (r - 2) * mx
            if not checks.le(ex_x, bound, avg):
                problems.append(f"excess of {x} is {ex_x} > {bound}")
    for s in range(tr.k):
        if s in tr.parent or s not in tr.children:
            continue
        members = _descendants(tr, s)
        d = max(tr.depth[x] for x in members)
        root_psi = float(psi[tr.initial[s]].sum())
        if avg > 0 and d > math.log2(root_psi / avg) + 1e-9:
            problems.append(f"forest depth {d} below root {s} exceeds log2 bound")
    by_depth: Dict[int, List[int]] = {}
    for i in tr.x_sets:
        by_depth.setdefault(tr.depth[i], []).append(i)
    for lvl, cols in by_depth.items():
        sizes = sum(tr.x_sets[i].size for i in cols)
        union = np.unique(np.concatenate([tr.x_sets[i] for i in cols]))
        if union.size != sizes:
            problems.append(f"X sets at depth {lvl} overlap")
    return problems


def _descendants(tr: RebalanceTrace, s: int) -> List[int]:
    out, stack = [], [s]
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(tr.children.get(v, []))
    return out


# ---------------------------------------------------------------- multibalance

def bisection_coloring(graph: WeightedGraph, oracle: SplitOracle, measure, k: int,
                       domain=None) -> np.ndarray:
    """Recursive oracle bisection into k classes; a part with c colors gets ceil(c/2) of them first."""
    phi = values_of(measure)
    colors = np.full(graph.n, -1, dtype=np.int64)
    view = SubgraphView(graph, domain)
    todo = [(view, 0, k)]
    while todo:
        v, first, count = todo.pop()
        if count == 1:
            colors[v.members] = first
            continue
        left = (count + 1) // 2
        total = float(phi[v.members].sum())
        U = oracle.split(v, phi, total * left / count)
        todo.append((v.sub(v.complement(U)), first + left, count - left))
        todo.append((v.sub(U), first, left))
    return colors


@dataclass
class MultiBalanceReport:
    bounds: List[float] = field(default_factory=list)
    maxima: List[float] = field(default_factory=list)
    avg_boundary: float = 0.0
    reference: float = 0.0
    traces: List[RebalanceTrace] = field(default_factory=list)

    @property
    def boundary_ratio(self) -> float:
        return self.avg_boundary / self.reference if self.reference > 0 else 0.0


def multibalance(graph: WeightedGraph, oracle: SplitOracle, measures: Sequence, k: int,
                 p: Optional[float] = None, report: Optional[MultiBalanceReport] = None) -> Coloring:
    """k-coloring balanced with respect to every measure in ``measures``.

    Starts from a recursive bisection on the first measure (unit weights if
    there is none) and then rebalances the measures from last to first.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    p = oracle.p if p is None else p
    stack = [values_of(m) for m in measures]
    if len(stack) > MAX_MEASURES:
        raise ParameterError(f"at most {MAX_MEASURES} measures are supported")
    base = stack[0] if stack else np.ones(graph.n)
    chi = Coloring(graph, k, bisection_coloring(graph, oracle, base, k))
    r = len(stack)
    bounds = [0.0] * r
    for j in reversed(range(r)):
        tr = RebalanceTrace(keep_sets=False) if report is not None else None
        chi = move_rebalance(graph, oracle, chi, stack[j], stack[j + 1:], p, trace=tr)
        if tr is not None:
            report.traces.append(tr)
        rj = r - j
        phi = stack[j]
        bounds[j] = 3 * float(phi.sum()) / k + 2 ** rj * float(phi.max() if phi.size else 0.0)
        for i in range(j + 1, r):
            top = float(stack[i].max()) if stack[i].size else 0.0
            bounds[i] = 4 * bounds[i] + 3 * 2 ** rj * top
    maxima = [float(Coloring(graph, k, chi.colors, phi).class_weights.max()) for phi in stack]
    if checks.enabled("cheap"):
        bad = [j for j in range(r) if not checks.le(maxima[j], bounds[j], bounds[j])]
        checks.require(not bad, "multibalance measure bound failed",
                       measures=bad, maxima=maxima, bounds=bounds)
    if report is not None:
        report.bounds, report.maxima = bounds, maxima
        report.avg_boundary = float(chi.class_boundary.mean())
        report.reference = (holder_conjugate(p) * k ** (-1.0 / p) * oracle.quality_s
                            * p_norm(graph.costs, p))
    return chi


# ---------------------------------------------------------------- balance_boundary

@dataclass
class BoundaryReport:
    stage1: Optional[Coloring] = None
    stage1_avg_boundary: float = 0.0
    stage1_max_boundary: float = 0.0
    max_boundary: float = 0.0
    reference: float = 0.0
    rebalance: Optional[RebalanceTrace] = None
    arc_checks: List[Tuple[int, int, float, float, float]] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def boundary_ratio(self) -> float:
        return self.max_boundary / self.reference if self.reference > 0 else 0.0


def bichromatic_measure(graph: WeightedGraph, colors: np.ndarray) -> np.ndarray:
    """Psi(v) = cost of the edges at v whose endpoints have different colors."""
    e = graph.edges
    cut = colors[e[:, 0]] != colors[e[:, 1]]
    psi = np.zeros(graph.n)
    np.add.at(psi, e[cut, 0], graph.costs[cut])
    np.add.at(psi, e[cut, 1], graph.costs[cut])
    return psi


def balance_boundary(graph: WeightedGraph, oracle: SplitOracle, measures: Sequence, k: int,
                     p: Optional[float] = None, report: Optional[BoundaryReport] = None) -> Coloring:
    """k-coloring balanced for ``measures`` whose class boundary costs are balanced too.

    The split cost measure is prepended to ``measures``; after the multi-balanced
    coloring is built, its bichromatic-edge measure is rebalanced with a dynamic
    extra measure that tracks monochromatic edges leaving the inflow of the
    moving color.
    """
    p = oracle.p if p is None else p
    pi = split_cost_measure(graph, oracle.quality_s, p).values
    stack = [pi] + [values_of(m) for m in measures]
    chi = multibalance(graph, oracle, stack, k, p)
    if report is None and checks.enabled("cheap"):
        report = BoundaryReport()
    if report is not None:
        report.stage1 = chi
        report.stage1_avg_boundary = float(chi.class_boundary.mean())
        report.stage1_max_boundary = float(chi.class_boundary.max())
        report.reference = oracle.quality_s * (
            holder_conjugate(p) * k ** (-1.0 / p) * p_norm(graph.costs, p)
            + float(graph.vertex_costs.max() if graph.n else 0.0))
    if k == 1 or graph.m == 0:
        if report is not None:
            report.max_boundary = float(chi.class_boundary.max())
        return chi
    colors = chi.colors
    psi = bichromatic_measure(graph, colors)
    e = graph.edges
    mono = colors[e[:, 0]] == colors[e[:, 1]]

    def dynamic(i, inflow):
        values = np.zeros(graph.n)
        if inflow.size == 0:
            return values
        inside = np.zeros(graph.n, dtype=bool)
        inside[inflow] = True
        sel = mono & (inside[e[:, 0]] != inside[e[:, 1]])
        end = np.where(inside[e[sel, 0]], e[sel, 0], e[sel, 1])
        np.add.at(values, end, graph.costs[sel])
        return values

    tr = RebalanceTrace(keep_sets=False)
    out = move_rebalance(graph, oracle, chi, psi, stack, p, dynamic=dynamic, trace=tr)
    if report is not None:
        report.rebalance = tr
        report.max_boundary = float(out.class_boundary.max())
        _check_inflow_decay(graph, mono, tr, report)
        checks.require(not report.violations, "boundary rebalancing check failed",
                       violations=report.violations[:10])
    return out


def _check_inflow_decay(graph, mono, tr: RebalanceTrace, report: BoundaryReport):
    """Monochromatic boundary of each inflow is bounded by its parent's (per arc)."""
    e = graph.edges

    def mono_boundary(S):
        inside = np.zeros(graph.n, dtype=bool)
        inside[S] = True
        cut = mono & (inside[e[:, 0]] != inside[e[:, 1]])
        return float(graph.costs[cut].sum())

    for x, i in sorted(tr.parent.items()):
        dyn = tr.dynamic[i]
        W = tr.v_out[i]
        inflow = tr.v_in[x]
        parent_in = tr.v_in.get(i, EMPTY)
        child = mono_boundary(inflow)
        within = boundary_cost(SubgraphView(graph, tr.x_sets[i]), inflow, "view")
        carried = float(dyn[inflow].sum())
        top = float(dyn[W].max()) if W.size else 0.0
        carried_bound = 0.75 * (float(dyn[W].sum()) + top)
        parent_val = mono_boundary(parent_in) if parent_in.size else 0.0
        report.arc_checks.append((i, x, parent_val, child, carried + within))
        if not checks.le(child, carried + within, child):
            report.violations.append(f"inflow of {x}: {child} > {carried} + {within}")
        if not checks.le(carried, carried_bound, carried_bound):
            report.violations.append(f"inflow of {x}: carried {carried} > {carried_bound}")
        if not checks.le(float(dyn[W].sum()), parent_val, parent_val):
            report.violations.append(f"dynamic measure of {i} exceeds its inflow boundary")
