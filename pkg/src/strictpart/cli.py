"""Command line front end.

Exit codes: 0 success, 1 a guarantee or regression check failed, 2 bad usage or input.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import checks
from .errors import ContractViolation, OracleMisbehavior, StrictPartError
from .graph import SubgraphView, boundary_cost, is_strictly_balanced
from .io import coloring_record, dumps, read_coloring, read_graph, tsv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _p_value(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 1:
        raise argparse.ArgumentTypeError("p must be greater than 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--oracle", default="greedy",
                        help="greedy, exhaustive, grid or separator:<name> (default greedy)")
    common.add_argument("--p", type=_p_value, default=None, help="norm exponent, >1 or inf")
    common.add_argument("--seed", type=int, default=0, help="recorded in the output for provenance")
    common.add_argument("--assert", dest="assert_level", choices=checks.LEVELS, default="cheap")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "tsv"), default="json")

    parser = argparse.ArgumentParser(prog="strictpart", description="Strictly balanced graph partitioning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", parents=[common], help="strictly balanced k-coloring of a graph file")
    p.add_argument("input")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--epsilon", type=float, default=0.1)

    s = sub.add_parser("split", parents=[common], help="one splitting set for a target weight")
    s.add_argument("input")
    s.add_argument("--target", type=float, required=True)

    v = sub.add_parser("validate", parents=[common], help="check a coloring file against a graph file")
    v.add_argument("coloring")
    v.add_argument("input")
    v.add_argument("--k", type=_positive_int, default=None, help="expected number of classes")

    b = sub.add_parser("bench", parents=[common], help="compare corpus metrics with a frozen manifest")
    b.add_argument("manifest", nargs="?", default=None, help="manifest path (default: bundled)")
    b.add_argument("--freeze", action="store_true", help="rewrite the manifest from the current code")
    b.add_argument("--workers", type=_positive_int, default=4)
    return parser


def _load_graph(path: str):
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return read_graph(path)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _record_text(record: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(record)
    rows = [(key, record[key] if not isinstance(record[key], list) else
             ",".join(str(x) for x in record[key])) for key in sorted(record)]
    return tsv(rows, ["field", "value"])


def cmd_partition(args) -> int:
    from .oracles import make_oracle
    from .strict import PipelineReport, ShrinkConfig, partition

    graph = _load_graph(args.input)
    config = ShrinkConfig(epsilon=args.epsilon)
    oracle = make_oracle(args.oracle, graph, args.p)
    report = PipelineReport()
    chi = partition(graph, None, oracle, args.k, args.p, config, report)
    record = coloring_record(chi)
    record["seed"] = args.seed
    record["oracle"] = args.oracle
    _emit(_record_text(record, args.format), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    from .oracles import make_oracle

    graph = _load_graph(args.input)
    total = float(graph.weights.sum())
    if not 0 <= args.target <= total:
        raise UsageError(f"target {args.target} outside [0, {total}]")
    oracle = make_oracle(args.oracle, graph, args.p)
    view = SubgraphView(graph, np.arange(graph.n))
    if args.target == 0:
        U = np.zeros(0, dtype=np.int64)
    else:
        U = np.asarray(oracle.split(view, graph.weights, args.target), dtype=np.int64)
    weight = float(graph.weights[U].sum())
    mw = float(graph.weights.max()) if graph.n else 0.0
    record = {"vertices": U.tolist(), "target": float(args.target), "weight": weight,
              "boundary_cost": boundary_cost(view, U), "oracle": args.oracle, "seed": args.seed}
    if args.oracle == "grid":
        from .grid import GridGraph, is_monotone
        record["monotone"] = bool(is_monotone(GridGraph(graph), U))
    _emit(_record_text(record, args.format), args.out)
    if abs(weight - args.target) > mw / 2 + checks.slack(weight, args.target):
        print(f"split weight {weight} misses target {args.target} by more than {mw / 2}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_validate(args) -> int:
    from .instances import measure_coloring

    graph = _load_graph(args.input)
    if not Path(args.coloring).is_file():
        raise UsageError(f"no such file: {args.coloring}")
    chi = read_coloring(args.coloring, graph)
    if args.k is not None and args.k != chi.k:
        raise UsageError(f"coloring has k={chi.k}, expected {args.k}")
    metrics = measure_coloring(graph, chi)
    report = is_strictly_balanced(chi)
    record = metrics.as_dict()
    record["k"] = chi.k
    record["deviations"] = [float(x) for x in report.deviations]
    _emit(_record_text(record, args.format), args.out)
    if not report:
        print(f"not strictly balanced: slack {report.slack}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


BENCH_HEADER = ["instance", "metric", "frozen", "current", "relative", "status"]


def cmd_bench(args) -> int:
    from .instances import bench, default_manifest_path, freeze_manifest, load_manifest

    if args.freeze:
        target = args.manifest or str(default_manifest_path())
        freeze_manifest(target, workers=args.workers)
        print(f"wrote {target}", file=sys.stderr)
        return EXIT_OK
    if args.manifest is not None and not Path(args.manifest).is_file():
        raise UsageError(f"no such file: {args.manifest}")
    manifest = load_manifest(args.manifest)
    rows = bench(manifest, workers=args.workers)
    text = tsv([(r.name, r.metric, r.frozen, r.current, r.relative, r.status) for r in rows], BENCH_HEADER)
    _emit(text, args.out)
    bad = [r for r in rows if r.status != "ok"]
    for r in bad:
        print(f"{r.name} {r.metric}: {r.status} ({r.frozen} -> {r.current})", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


COMMANDS = {"partition": cmd_partition, "split": cmd_split, "validate": cmd_validate, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        with checks.assertion_level(args.assert_level):
            return COMMANDS[args.command](args)
    except (ContractViolation, OracleMisbehavior) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, StrictPartError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
