"""Reading and writing graphs, colorings and vertex sets.

Graph text format, one item per line, ``#`` starts a comment::

    n m [d]
    [x_1 .. x_d] w          (n vertex lines)
    u v c                   (m edge lines, 0-based ids)

Numbers that are integral are written without a decimal point, everything
else with ``repr``, so a file written here reads back bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np

from .errors import DomainError, ParameterError
from .graph import Coloring, WeightedGraph


class FormatError(ParameterError):
    """The input text does not follow the expected file format."""


def format_number(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return repr(x)


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _number(tok: str, lineno: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise FormatError(f"line {lineno}: {tok!r} is not a number") from None
    if not math.isfinite(value):
        raise FormatError(f"line {lineno}: {tok!r} is not finite")
    return value


def _integer(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"line {lineno}: {tok!r} is not an integer") from None


def parse_graph(text: str) -> WeightedGraph:
    lines = list(_tokens(text))
    if not lines:
        raise FormatError("empty graph file")
    lineno, head = lines[0]
    if len(head) not in (2, 3):
        raise FormatError(f"line {lineno}: header must be 'n m [d]'")
    n, m = _integer(head[0], lineno), _integer(head[1], lineno)
    d = _integer(head[2], lineno) if len(head) == 3 else None
    if n < 0 or m < 0 or (d is not None and d < 1):
        raise FormatError(f"line {lineno}: negative count in header")
    if len(lines) != 1 + n + m:
        raise FormatError(f"expected {n} vertex and {m} edge lines, found {len(lines) - 1} lines")
    width = 1 if d is None else d + 1
    weights = np.empty(n)
    coords = np.empty((n, d), dtype=np.int64) if d is not None else None
    for v in range(n):
        lineno, toks = lines[1 + v]
        if len(toks) != width:
            raise FormatError(f"line {lineno}: vertex line needs {width} fields")
        if coords is not None:
            coords[v] = [_integer(t, lineno) for t in toks[:d]]
        weights[v] = _number(toks[-1], lineno)
    edges = np.empty((m, 2), dtype=np.int64)
    costs = np.empty(m)
    for e in range(m):
        lineno, toks = lines[1 + n + e]
        if len(toks) != 3:
            raise FormatError(f"line {lineno}: edge line needs 'u v c'")
        edges[e] = (_integer(toks[0], lineno), _integer(toks[1], lineno))
        costs[e] = _number(toks[2], lineno)
    try:
        return WeightedGraph(n, edges, costs, weights, coords)
    except (ParameterError, DomainError) as exc:
        raise FormatError(str(exc)) from None


def read_graph(path: Union[str, Path]) -> WeightedGraph:
    return parse_graph(Path(path).read_text())


def format_graph(graph: WeightedGraph) -> str:
    d = graph.coords.shape[1] if graph.coords is not None else None
    out = [f"{graph.n} {graph.m}" + (f" {d}" if d is not None else "")]
    for v in range(graph.n):
        w = format_number(graph.weights[v])
        if d is None:
            out.append(w)
        else:
            out.append(" ".join(str(int(x)) for x in graph.coords[v]) + " " + w)
    for (u, v), c in zip(graph.edges.tolist(), graph.costs.tolist()):
        out.append(f"{u} {v} {format_number(c)}")
    return "\n".join(out) + "\n"


def write_graph(graph: WeightedGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(format_graph(graph))


# ---------------------------------------------------------------- JSON

def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ParameterError("JSON output cannot hold non-finite numbers")
        if x.is_integer() and abs(x) < 2 ** 53:
            return f"{int(x)}.0"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, np.integer, np.floating)) for x in obj):
            return "[" + ", ".join(_encode(x, indent, level + 1) for x in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(x, indent, level + 1) for x in obj) + end + "]"
    raise ParameterError(f"cannot encode {type(obj).__name__} as JSON")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def coloring_record(coloring: Coloring) -> dict:
    from .graph import is_strictly_balanced

    cb = coloring.class_boundary
    return {
        "k": coloring.k,
        "colors": coloring.colors.tolist(),
        "class_weights": [float(x) for x in coloring.class_weights],
        "max_boundary_cost": float(cb.max()) if cb.size else 0.0,
        "avg_boundary_cost": float(cb.mean()) if cb.size else 0.0,
        "eq1_slack": is_strictly_balanced(coloring).slack,
    }


def write_coloring(coloring: Coloring, path: Union[str, Path], extra: Optional[dict] = None) -> None:
    record = coloring_record(coloring)
    if extra:
        record.update(extra)
    Path(path).write_text(dumps(record))


def read_coloring(path: Union[str, Path], graph: WeightedGraph) -> Coloring:
    try:
        record = json.loads(Path(path).read_text())
        k = int(record["k"])
        colors = np.asarray(record["colors"], dtype=np.int64)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed coloring file: {exc}") from None
    if colors.shape != (graph.n,):
        raise FormatError(f"coloring has {colors.size} entries for {graph.n} vertices")
    return Coloring(graph, k, colors)


def read_vertex_set(path: Union[str, Path]) -> np.ndarray:
    try:
        record = json.loads(Path(path).read_text())
        return np.asarray(record["vertices"], dtype=np.int64)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed vertex-set file: {exc}") from None


def tsv(rows: Iterable[Iterable], header: List[str]) -> str:
    def cell(x):
        if isinstance(x, (float, np.floating)):
            return format(float(x), ".17g")
        return str(x)

    lines = ["\t".join(header)]
    lines.extend("\t".join(cell(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"
