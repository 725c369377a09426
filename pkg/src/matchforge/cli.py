"""Command line interface and its file formats.

Exit codes: 0 on success, 2 for usage mistakes (bad flags or flag
combinations), 1 for data or solver failures.  All error text goes to
stderr with a literal ``error:`` prefix.

Input formats
-------------
units csv      header ``id,treat,x1,...,xp[,score][,y]``; one unit per row.
edge-list csv  header ``treated_id,control_id,cost``; one allowed pair per row.

Output formats
--------------
pairs csv      ``treated_id,control_id,cost`` sorted by treated then control id.
summary json   cardinality, total cost, gap bound, unmatched ids, balance
               table, trace counters and a config echo; deterministic for
               identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .greedy import ORDER_POLICIES, GreedyConfig
from .metrics import METRIC_KINDS, fit_metric, pairwise_costs
from .model import BipartiteGraph, Unit, build_graph_from_edges, graph_from_cost_matrix
from .pipeline import MatchRequest, MatchResult, brute_force_oracle, run_request
from .transforms import apply_caliper

__all__ = ["run_cli", "main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with its own format
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _build_parser() -> _Parser:
    parser = _Parser(prog="matchforge", description="Bipartite matching for observational studies")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="solve a matching problem", add_help=True)
    m.add_argument("--input", required=True, help="input csv path")
    m.add_argument("--input-kind", choices=("units", "edge-list"), default="units")
    m.add_argument("--metric", choices=METRIC_KINDS, help="dissimilarity for units input")
    m.add_argument("--caliper", type=float, help="drop pairs with cost above this")
    m.add_argument("--method", choices=("greedy", "hungarian", "optimal"), default="optimal")
    m.add_argument("--k", type=int, default=1, help="controls per treated unit (greedy)")
    m.add_argument("--replacement", action="store_true", help="allow control reuse (greedy)")
    m.add_argument("--order", choices=ORDER_POLICIES, default="input-order",
                   help="greedy processing order")
    m.add_argument("--seed", type=int, help="seed for --order random")
    m.add_argument("--digits", type=int, default=6, help="integerization digits")
    m.add_argument("--out", required=True, help="pairs csv output path")
    m.add_argument("--summary", help="summary json output path")
    m.add_argument("--figures", help="directory for diagnostic figures")

    o = sub.add_parser("oracle", help="exhaustive optimum for small instances")
    o.add_argument("--input", required=True, help="edge-list csv path")
    o.add_argument("--m", required=True, type=int, help="exact matching cardinality")
    o.add_argument("--out", help="json output path (default stdout)")

    b = sub.add_parser("bench", help="time the solver on a seeded random instance")
    b.add_argument("--n-treated", required=True, type=int)
    b.add_argument("--n-control", required=True, type=int)
    b.add_argument("--dims", type=int, default=2, help="covariate dimensions")
    b.add_argument("--density", type=float, help="fraction of pairs kept (1 = complete)")
    b.add_argument("--avg-degree", type=float, help="target average edges per treated unit")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--digits", type=int, default=6)
    b.add_argument("--method", choices=("greedy", "optimal"), default="optimal")
    b.add_argument("--label", help="name for this run in reports")
    b.add_argument("--out", help="json output path (default stdout)")
    b.add_argument("--figures", help="directory for the runtime figure")
    return parser


def read_units_csv(path: str) -> tuple[list[Unit], list[Unit], list[str]]:
    """Parse a units csv into (treated, controls, covariate names)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[:2] != ["id", "treat"]:
            raise ValueError(f"{path}: header must start with 'id,treat'")
        k = 2
        while k < len(header) and header[k] == f"x{k - 1}":
            k += 1
        p = k - 2
        has_score = k < len(header) and header[k] == "score"
        if has_score:
            k += 1
        has_y = k < len(header) and header[k] == "y"
        if has_y:
            k += 1
        if k != len(header):
            raise ValueError(f"{path}: unexpected column {header[k]!r}; "
                             "expected id,treat,x1..xp[,score][,y]")

        treated: list[Unit] = []
        controls: list[Unit] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            uid = row[0].strip()
            if not uid:
                raise ValueError(f"{path} line {lineno}: empty id")
            if uid in seen:
                raise ValueError(f"{path} line {lineno}: duplicate id {uid!r}")
            seen.add(uid)
            if row[1].strip() not in ("0", "1"):
                raise ValueError(f"{path} line {lineno}: treat must be 0 or 1, got {row[1]!r}")
            treat = int(row[1])
            try:
                covs = [float(v) for v in row[2:2 + p]]
                score = float(row[2 + p]) if has_score else None
                y = float(row[-1]) if has_y else None
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            unit = Unit(uid, treat, np.array(covs), score, y)
            (treated if treat == 1 else controls).append(unit)
        names = [f"x{j + 1}" for j in range(p)]
        return treated, controls, names


def read_edge_list_csv(path: str) -> BipartiteGraph:
    """Parse an edge-list csv; side id orders follow first appearance."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != ["treated_id", "control_id", "cost"]:
            raise ValueError(f"{path}: header must be 'treated_id,control_id,cost'")
        treated_ids: list[str] = []
        control_ids: list[str] = []
        t_seen: set[str] = set()
        c_seen: set[str] = set()
        edges: list[tuple[str, str, float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path} line {lineno}: expected 3 fields, got {len(row)}")
            tid, cid = row[0].strip(), row[1].strip()
            if not tid or not cid:
                raise ValueError(f"{path} line {lineno}: empty id")
            try:
                cost = float(row[2])
            except ValueError:
                raise ValueError(f"{path} line {lineno}: cost {row[2]!r} is not a number") from None
            if not np.isfinite(cost) or cost < 0:
                raise ValueError(f"{path} line {lineno}: cost must be finite and non-negative")
            if tid not in t_seen:
                t_seen.add(tid)
                treated_ids.append(tid)
            if cid not in c_seen:
                c_seen.add(cid)
                control_ids.append(cid)
            edges.append((tid, cid, cost))
        return build_graph_from_edges(treated_ids, control_ids, edges)


def write_pairs_csv(path: str, result: MatchResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["treated_id", "control_id", "cost"])
        for tid, cid, cost in sorted(result.pair_records):
            writer.writerow([tid, cid, repr(float(cost))])


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _cmd_match(args, parser: _Parser) -> int:
    if args.method != "greedy":
        if args.replacement or args.k != 1 or args.order != "input-order" or args.seed is not None:
            parser.error("--k/--replacement/--order/--seed apply only to --method greedy")
    if args.order == "random" and args.seed is None:
        parser.error("--order random requires --seed")
    if args.order != "random" and args.seed is not None:
        parser.error("--seed applies only to --order random")
    if args.k < 1:
        parser.error("--k must be at least 1")
    if args.digits < 0:
        parser.error("--digits must be non-negative")
    if args.caliper is not None and args.caliper < 0:
        parser.error("--caliper must be non-negative")
    if args.input_kind == "units" and args.metric is None:
        parser.error("units input requires --metric")
    if args.input_kind == "edge-list" and args.metric is not None:
        parser.error("--metric does not apply to edge-list input")

    treated = controls = names = None
    if args.input_kind == "units":
        treated, controls, names = read_units_csv(args.input)
        spec = fit_metric(treated + controls, args.metric)
        costs = pairwise_costs(treated, controls, spec)
        graph = graph_from_cost_matrix(costs, [u.id for u in treated],
                                       [u.id for u in controls])
    else:
        graph = read_edge_list_csv(args.input)

    greedy_cfg = None
    if args.method == "greedy":
        greedy_cfg = GreedyConfig(order=args.order, seed=args.seed, k=args.k,
                                  with_replacement=args.replacement)
    request = MatchRequest(
        method="optimal-flow" if args.method == "optimal" else args.method,
        greedy=greedy_cfg,
        caliper=args.caliper,
        digits=args.digits,
    )
    result = run_request(graph, request, treated, controls, names)

    write_pairs_csv(args.out, result)
    if args.summary:
        payload = result.canonical_dict()
        payload["config"] = {
            "input": args.input,
            "input_kind": args.input_kind,
            "metric": args.metric,
            "caliper": args.caliper,
            "method": args.method,
            "k": args.k,
            "replacement": args.replacement,
            "order": args.order,
            "seed": args.seed,
            "digits": args.digits,
        }
        _write_json(payload, args.summary)
    if args.figures:
        from .report import write_match_figures

        write_match_figures(result, args.figures)
    return 0


def _cmd_oracle(args) -> int:
    graph = read_edge_list_csv(args.input)
    matching, total = brute_force_oracle(graph, args.m)
    lookup = graph.edge_cost_map()
    payload = {
        "m": args.m,
        "total_cost": total,
        "pairs": [
            {"treated_id": graph.treated_ids[i], "control_id": graph.control_ids[j],
             "cost": float(lookup[(i, j)])}
            for i, j in matching.pairs
        ],
    }
    _write_json(payload, args.out)
    return 0


def _bench_instance(args) -> tuple[BipartiteGraph, int]:
    rng = np.random.default_rng(args.seed)
    xt = rng.random((args.n_treated, args.dims))
    xc = rng.random((args.n_control, args.dims))
    treated = [Unit(f"t{i + 1}", 1, xt[i]) for i in range(args.n_treated)]
    controls = [Unit(f"c{j + 1}", 0, xc[j]) for j in range(args.n_control)]
    spec = fit_metric(treated + controls, "euclidean")
    costs = pairwise_costs(treated, controls, spec)
    graph = graph_from_cost_matrix(costs, [u.id for u in treated], [u.id for u in controls])
    density = args.density if args.density is not None else min(1.0, args.avg_degree / args.n_control)
    if density < 1.0:
        omega = float(np.quantile(costs.values, density))
        graph = apply_caliper(graph, omega)
    return graph, graph.n_edges


def _cmd_bench(args, parser: _Parser) -> int:
    if (args.density is None) == (args.avg_degree is None):
        parser.error("give exactly one of --density or --avg-degree")
    if args.density is not None and not 0 < args.density <= 1:
        parser.error("--density must be in (0, 1]")
    if args.avg_degree is not None and args.avg_degree <= 0:
        parser.error("--avg-degree must be positive")
    if args.n_treated < 1 or args.n_control < 1:
        parser.error("instance sides must be positive")

    t0 = time.perf_counter()
    graph, n_edges = _bench_instance(args)
    t1 = time.perf_counter()
    if args.method == "greedy":
        request = MatchRequest(method="greedy", greedy=GreedyConfig(), digits=args.digits)
    else:
        request = MatchRequest(method="optimal-flow", digits=args.digits)
    result = run_request(graph, request)
    t2 = time.perf_counter()

    record = {
        "label": args.label or f"{args.n_treated}x{args.n_control}",
        "config": {
            "n_treated": args.n_treated,
            "n_control": args.n_control,
            "dims": args.dims,
            "density": args.density,
            "avg_degree": args.avg_degree,
            "seed": args.seed,
            "digits": args.digits,
            "method": args.method,
        },
        "n_edges": n_edges,
        "cardinality": result.cardinality,
        "total_cost": result.total_cost,
        "trace": {
            "iterations": result.trace.iterations,
            "augmentations": result.trace.augmentations,
            "cycles_canceled": result.trace.cycles_canceled,
        },
        "build_seconds": t1 - t0,
        "solve_seconds": t2 - t1,
    }
    _write_json(record, args.out)
    if args.figures:
        import os

        from .report import write_bench_figure

        write_bench_figure([record], os.path.join(args.figures, "bench_times.png"))
    return 0


def run_cli(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of raising SystemExit."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "match":
            return _cmd_match(args, parser)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_bench(args, parser)
    except SystemExit as exc:  # argparse or explicit usage errors
        return int(exc.code or 0)
    except (ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
