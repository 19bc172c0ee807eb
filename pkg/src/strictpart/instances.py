"""Instance generators, coloring metrics, the greedy baseline and regression bookkeeping."""

from __future__ import annotations

import copy
import hashlib
import heapq
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from . import checks
from .errors import ParameterError
from .graph import (Coloring, WeightedGraph, is_strictly_balanced, local_fluctuation)
from .io import dumps, format_graph


@dataclass
class InstanceBundle:
    graph: WeightedGraph
    generator: str
    seed: int
    params: dict = field(default_factory=dict)
    lower_bound: Optional[float] = None

    @property
    def costs(self) -> np.ndarray:
        return self.graph.costs

    @property
    def weights(self) -> np.ndarray:
        return self.graph.weights

    @property
    def meta(self) -> dict:
        return {"generator": self.generator, "seed": self.seed, "params": copy.deepcopy(self.params)}

    def digest(self) -> str:
        return hashlib.sha256(format_graph(self.graph).encode()).hexdigest()


# ---------------------------------------------------------------- generators

def _weights(rng: np.random.Generator, n: int, kind: str) -> np.ndarray:
    if kind == "unit":
        return np.ones(n)
    if kind == "random":
        return rng.random(n)
    if kind == "int":
        return rng.integers(1, 10, size=n).astype(np.float64)
    raise ParameterError(f"unknown weight kind {kind!r}")


def _costs(rng: np.random.Generator, m: int, cost_max: int) -> np.ndarray:
    if cost_max < 1:
        raise ParameterError("cost_max must be at least 1")
    if cost_max == 1:
        return np.ones(m)
    return rng.integers(1, cost_max + 1, size=m).astype(np.float64)


def grid_instance(shape, seed: int = 0, cost_max: int = 1, weights: str = "unit") -> InstanceBundle:
    """Full box grid; costs uniform in {1..cost_max}."""
    from .grid import GridGraph

    shape = [int(s) for s in shape]
    if not shape or min(shape) < 1:
        raise ParameterError("grid shape needs positive side lengths")
    rng = np.random.default_rng(seed)
    base = GridGraph.lattice(shape).base
    g = WeightedGraph(base.n, base.edges, _costs(rng, base.m, cost_max),
                      _weights(rng, base.n, weights), base.coords)
    return InstanceBundle(g, "grid", seed, {"shape": shape, "cost_max": cost_max, "weights": weights})


def random_regular(n: int, d: int = 4, seed: int = 0, cost_max: int = 1, weights: str = "unit",
                   max_tries: int = 1000) -> InstanceBundle:
    """Simple d-regular graph from the pairing model, restarting on loops or multi-edges."""
    if n < 1 or d < 0 or d >= n or (n * d) % 2:
        raise ParameterError("need 0 <= d < n and n * d even")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = rng.permutation(np.repeat(np.arange(n), d)).reshape(-1, 2)
        lo, hi = stubs.min(axis=1), stubs.max(axis=1)
        if np.any(lo == hi) or np.unique(lo * n + hi).size != lo.size:
            continue
        order = np.lexsort((hi, lo))
        edges = np.stack([lo[order], hi[order]], axis=1)
        g = WeightedGraph(n, edges, _costs(rng, edges.shape[0], cost_max), _weights(rng, n, weights))
        return InstanceBundle(g, "regular", seed, {"n": n, "d": d, "cost_max": cost_max,
                                                   "weights": weights})
    raise ParameterError(f"no simple {d}-regular graph found in {max_tries} tries")


def random_bounded_degree(n: int, max_degree: int = 4, seed: int = 0, cost_max: int = 1,
                          weights: str = "random", density: float = 0.8) -> InstanceBundle:
    """Random graph with degrees at most ``max_degree``; about density * n * max_degree / 2 edges."""
    if n < 1 or max_degree < 0:
        raise ParameterError("need n >= 1 and max_degree >= 0")
    rng = np.random.default_rng(seed)
    goal = int(density * n * max_degree / 2)
    deg = np.zeros(n, dtype=np.int64)
    seen = set()
    edges = []
    attempts = 0
    while len(edges) < goal and attempts < 50 * goal + 100:
        attempts += 1
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u == v or deg[u] >= max_degree or deg[v] >= max_degree:
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
        deg[u] += 1
        deg[v] += 1
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    g = WeightedGraph(n, edges, _costs(rng, edges.shape[0], cost_max), _weights(rng, n, weights))
    return InstanceBundle(g, "bounded", seed, {"n": n, "max_degree": max_degree, "cost_max": cost_max,
                                               "weights": weights, "density": density})


GENERATORS = {"grid": grid_instance, "regular": random_regular, "bounded": random_bounded_degree}


def make_instance(generator: str, seed: int = 0, **params) -> InstanceBundle:
    if generator not in GENERATORS:
        raise ParameterError(f"unknown generator {generator!r}; known: {sorted(GENERATORS)}")
    return GENERATORS[generator](seed=seed, **params)


def replicate_instance(base: InstanceBundle, k: int) -> InstanceBundle:
    """floor(k/4) disjoint copies of the base graph with the same costs and weights."""
    if k < 4:
        raise ParameterError("replication needs k >= 4")
    copies = k // 4
    g = base.graph
    n = g.n
    edges = np.concatenate([g.edges + i * n for i in range(copies)]) if g.m else np.zeros((0, 2), np.int64)
    coords = None
    if g.coords is not None:
        # shift copies apart along the first axis so that coordinates stay distinct
        span = int(g.coords[:, 0].max() - g.coords[:, 0].min()) + 2 if n else 0
        shifted = []
        for i in range(copies):
            c = g.coords.copy()
            c[:, 0] += i * span
            shifted.append(c)
        coords = np.concatenate(shifted)
    out = WeightedGraph(copies * n, edges, np.tile(g.costs, copies), np.tile(g.weights, copies), coords)
    params = {"base": base.meta, "k": k, "copies": copies, "copy_size": n}
    return InstanceBundle(out, "replicate", base.seed, params, base.lower_bound)


def copy_of(bundle: InstanceBundle) -> np.ndarray:
    """Copy index of every vertex of a replicated bundle."""
    n0 = bundle.params["copy_size"]
    return np.arange(bundle.graph.n) // max(n0, 1)


# ---------------------------------------------------------------- metrics

@dataclass
class ColoringMetrics:
    max_boundary: float
    avg_boundary: float
    class_weights: np.ndarray
    eq1_slack: float
    strictly_balanced: bool
    roughly_balanced: bool

    def as_dict(self) -> dict:
        return {"max_boundary": self.max_boundary, "avg_boundary": self.avg_boundary,
                "class_weights": self.class_weights.tolist(), "eq1_slack": self.eq1_slack,
                "strictly_balanced": self.strictly_balanced, "roughly_balanced": self.roughly_balanced}


def measure_coloring(graph: WeightedGraph, coloring: Coloring, weights=None) -> ColoringMetrics:
    chi = coloring if weights is None else Coloring(graph, coloring.k, coloring.colors, weights)
    cb = chi.class_boundary
    cw = chi.class_weights
    report = is_strictly_balanced(chi)
    avg = float(cw.sum()) / chi.k
    return ColoringMetrics(float(cb.max()) if cb.size else 0.0, float(cb.mean()) if cb.size else 0.0,
                           cw.copy(), report.slack, bool(report), bool(cw.max() <= 2 * avg + checks.slack(avg)))


def greedy_baseline(graph: WeightedGraph, weights=None, k: int = 2) -> Coloring:
    """Heaviest vertex first into the currently lightest class (ties by lowest id)."""
    if k < 1:
        raise ParameterError("k must be at least 1")
    w = graph.weights if weights is None else np.asarray(weights, dtype=np.float64)
    order = np.lexsort((np.arange(graph.n), -w))
    heap = [(0.0, i) for i in range(k)]
    colors = np.empty(graph.n, dtype=np.int64)
    for v in order.tolist():
        load, i = heapq.heappop(heap)
        colors[v] = i
        heapq.heappush(heap, (load + float(w[v]), i))
    out = Coloring(graph, k, colors, w)
    if checks.enabled("cheap"):
        report = is_strictly_balanced(out)
        checks.require(bool(report), "greedy baseline is not strictly balanced", slack=report.slack)
    return out


# ---------------------------------------------------------------- lower bounds

@dataclass
class CopyCertificate:
    copy: int
    red: List[int]
    blue: List[int]
    certificate: float        # boundary cost of U* inside the copy
    separator_cost: float     # tau(A cap B) of the induced separation
    within_copy_boundary: float

    @property
    def valid(self) -> bool:
        return self.certificate <= self.within_copy_boundary + 1e-9


@dataclass
class LowerBoundReport:
    copies: List[CopyCertificate] = field(default_factory=list)
    skipped: Optional[str] = None
    fluctuation: float = math.inf

    @property
    def certificate(self) -> float:
        return min((c.certificate for c in self.copies), default=0.0)

    @property
    def total_certificate(self) -> float:
        return float(sum(c.certificate for c in self.copies))


def lower_bound_report(bundle: InstanceBundle, coloring: Coloring) -> LowerBoundReport:
    """Per-copy certificates: the cut of a color bipartition with both sides <= 2/3 of the copy.

    The cost of edges inside copy ``i`` between the two sides is at most the
    within-copy boundary cost of the coloring, so each certificate is a lower
    bound for it.
    """
    if bundle.generator != "replicate":
        raise ParameterError("lower bounds need a bundle built by replicate_instance")
    g = bundle.graph
    k = coloring.k
    rep = LowerBoundReport()
    try:
        rep.fluctuation = local_fluctuation(g)
    except ParameterError:
        rep.fluctuation = math.inf
    cw = coloring.class_weights
    avg = float(g.weights.sum()) / k
    if cw.max() > 2 * avg + checks.slack(avg):
        rep.skipped = f"coloring is not roughly balanced (max {cw.max()} > 2 * {avg})"
        return rep
    which = copy_of(bundle)
    colors = coloring.colors
    e = g.edges
    tau = g.vertex_costs
    same_copy_edge = which[e[:, 0]] == which[e[:, 1]]
    for i in range(bundle.params["copies"]):
        members = np.flatnonzero(which == i)
        wc = np.bincount(colors[members], weights=g.weights[members], minlength=k)
        total = float(wc.sum())
        red, blue, loads = [], [], [0.0, 0.0]
        for j in sorted(range(k), key=lambda j: (-wc[j], j)):
            side = 0 if loads[0] <= loads[1] else 1
            (red if side == 0 else blue).append(j)
            loads[side] += float(wc[j])
        if max(loads) > 2 / 3 * total + checks.slack(total):
            rep.skipped = f"copy {i}: no bipartition within 2/3"
            return rep
        in_red = np.zeros(k, dtype=bool)
        in_red[red] = True
        ustar = np.zeros(g.n, dtype=bool)
        ustar[members] = in_red[colors[members]]
        sel = same_copy_edge & (which[e[:, 0]] == i)
        cut_edges = sel & (ustar[e[:, 0]] != ustar[e[:, 1]])
        cert = float(g.costs[cut_edges].sum())
        outer = np.unique(np.where(ustar[e[cut_edges, 0]], e[cut_edges, 1], e[cut_edges, 0]))
        bichrom = sel & (colors[e[:, 0]] != colors[e[:, 1]])
        within = 2.0 * float(g.costs[bichrom].sum())
        rep.copies.append(CopyCertificate(i, red, blue, cert, float(tau[outer].sum()), within))
    return rep


# ---------------------------------------------------------------- corpus and manifest

DEFAULT_CORPUS = [
    {"name": "grid8x8-k4", "generator": "grid", "seed": 0,
     "params": {"shape": [8, 8]}, "k": 4, "oracle": "grid"},
    {"name": "grid16x16-costs-k8", "generator": "grid", "seed": 1,
     "params": {"shape": [16, 16], "cost_max": 8, "weights": "random"}, "k": 8, "oracle": "grid"},
    {"name": "grid6x6x6-k6", "generator": "grid", "seed": 2,
     "params": {"shape": [6, 6, 6], "weights": "int"}, "k": 6, "oracle": "grid"},
    {"name": "bounded200-k8", "generator": "bounded", "seed": 3,
     "params": {"n": 200, "max_degree": 6, "cost_max": 4}, "k": 8, "oracle": "greedy"},
    {"name": "regular120-k5", "generator": "regular", "seed": 4,
     "params": {"n": 120, "d": 4, "weights": "random"}, "k": 5, "oracle": "greedy"},
    {"name": "regular60-x2-k8", "generator": "regular", "seed": 5,
     "params": {"n": 60, "d": 4}, "k": 8, "oracle": "greedy", "replicate": True},
    {"name": "grid10x10-x3-k12", "generator": "grid", "seed": 6,
     "params": {"shape": [10, 10]}, "k": 12, "oracle": "grid", "replicate": True},
]

METRICS = ("max_boundary", "avg_boundary", "boundary_ratio", "greedy_max_boundary", "lb_ratio")


def build_record_instance(record: dict) -> InstanceBundle:
    bundle = make_instance(record["generator"], record["seed"], **record["params"])
    if record.get("replicate"):
        bundle = replicate_instance(bundle, record["k"])
    return bundle


def run_record(record: dict) -> dict:
    """Build the instance, partition it and return the metric values."""
    from .oracles import make_oracle
    from .strict import PipelineReport, partition

    bundle = build_record_instance(record)
    g = bundle.graph
    oracle = make_oracle(record["oracle"], g)
    rep = PipelineReport()
    chi = partition(g, None, oracle, record["k"], report=rep)
    base = greedy_baseline(g, None, record["k"])
    metrics = {"max_boundary": rep.max_boundary, "avg_boundary": rep.avg_boundary,
               "boundary_ratio": rep.boundary_ratio,
               "greedy_max_boundary": float(base.class_boundary.max())}
    if record.get("replicate"):
        lb = lower_bound_report(bundle, chi)
        cert = lb.certificate
        metrics["lb_ratio"] = rep.avg_boundary / cert if cert > 0 else 0.0
    return {"hash": bundle.digest(), "metrics": metrics}


def strictify_constant(seeds=range(2000)) -> float:
    """Largest observed (out - in) boundary growth of the strictify step over tiny instances."""
    from .oracles import ExhaustiveOracle
    from .strict import PipelineReport, partition

    worst = 0.0
    for seed in seeds:
        g, k = tiny_instance(seed)
        rep = PipelineReport()
        partition(g, None, ExhaustiveOracle(), k, report=rep)
        if rep.strictify is not None:
            worst = max(worst, rep.strictify.growth_constant)
    return worst


def tiny_instance(seed: int):
    """Random graph with n <= 8 vertices, small integer costs and weights, and k in {2, 3}."""
    rng = np.random.default_rng(10_000 + seed)
    n = int(rng.integers(3, 9))
    k = int(rng.integers(2, 4))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < 0.45
    edges = [pq for pq, kp in zip(pairs, keep) if kp]
    costs = rng.integers(1, 4, size=len(edges)).astype(np.float64)
    weights = rng.integers(1, 5, size=n).astype(np.float64)
    return WeightedGraph(n, edges, costs, weights), k


def default_manifest_path():
    return resources.files("strictpart").joinpath("data/regression_manifest.json")


def load_manifest(path: Union[str, Path, None] = None) -> dict:
    target = default_manifest_path() if path is None else Path(path)
    try:
        data = json.loads(target.read_text())
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read manifest: {exc}") from None
    if not isinstance(data, dict) or "instances" not in data:
        raise ParameterError("manifest needs an 'instances' list")
    return data


def freeze_manifest(path: Union[str, Path], corpus: Optional[List[dict]] = None,
                    workers: int = 4) -> dict:
    corpus = DEFAULT_CORPUS if corpus is None else corpus
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run_record, corpus))
    instances = []
    for record, res in zip(corpus, results):
        entry = copy.deepcopy(record)
        entry.update(res)
        instances.append(entry)
    manifest = {"version": 1, "tolerance": 0.05, "instances": instances,
                "constants": {"strictify_growth": strictify_constant()}}
    Path(path).write_text(dumps(manifest))
    return manifest


@dataclass
class BenchRow:
    name: str
    metric: str
    frozen: float
    current: float
    status: str

    @property
    def relative(self) -> float:
        if self.frozen == 0:
            return 0.0 if self.current == 0 else math.inf
        return abs(self.current - self.frozen) / abs(self.frozen)


def within(frozen: float, current: float, tol: float) -> bool:
    if frozen == 0:
        return abs(current) <= 1e-12
    return abs(current - frozen) <= tol * abs(frozen)


def bench(manifest: dict, workers: int = 4) -> List[BenchRow]:
    """Rerun every manifest instance and compare its metrics with the frozen ones."""
    tol = float(manifest.get("tolerance", 0.05))
    records = manifest.get("instances", [])
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run_record, records))
    rows = []
    for record, res in zip(records, results):
        name = record.get("name", "?")
        if record.get("hash") and record["hash"] != res["hash"]:
            rows.append(BenchRow(name, "hash", 0.0, 0.0, "hash-mismatch"))
            continue
        frozen = record.get("metrics", {})
        for key in sorted(frozen):
            cur = float(res["metrics"].get(key, math.nan))
            ok = within(float(frozen[key]), cur, tol)
            rows.append(BenchRow(name, key, float(frozen[key]), cur, "ok" if ok else "regression"))
    return rows
