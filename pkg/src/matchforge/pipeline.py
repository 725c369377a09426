"""End-to-end solving: request dispatch, oracle, and balance diagnostics.

The default solver finds the maximum matching size first and then the
cheapest matching of that size, working on costs integerized at a
configurable number of digits; reported costs are mapped back by the
same scale, so they can differ from the true float optimum by at most
``cardinality * 10**-digits`` (recorded in the trace as the optimality
gap bound).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .greedy import GreedyConfig, greedy_match
from .hungarian import solve_luap
from .metrics import integerize_values
from .mincostflow import min_cost_matching
from .model import (
    WITHOUT_REPLACEMENT,
    BipartiteGraph,
    Matching,
    Unit,
    to_adjacency_list,
    to_cost_matrix,
)
from .transforms import apply_caliper

METHODS = ("greedy", "hungarian", "optimal-flow")

__all__ = [
    "METHODS",
    "MatchRequest",
    "SolveTrace",
    "BalanceReport",
    "CovariateBalance",
    "MatchResult",
    "run_request",
    "optimal_match",
    "brute_force_oracle",
    "balance_report",
]


@dataclass(frozen=True)
class MatchRequest:
    """What to solve and how."""

    method: str = "optimal-flow"
    greedy: GreedyConfig | None = None
    caliper: float | None = None
    digits: int = 6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if (self.greedy is not None) != (self.method == "greedy"):
            raise ValueError("greedy configuration must be given exactly when method='greedy'")
        if self.digits < 0:
            raise ValueError("digits must be non-negative")
        if self.caliper is not None and not (np.isfinite(self.caliper) and self.caliper >= 0):
            raise ValueError("caliper must be a finite non-negative number")


@dataclass(frozen=True)
class SolveTrace:
    """Counters from one solve; wall time is observational and excluded
    from canonical serializations."""

    method: str
    iterations: int
    augmentations: int
    cycles_canceled: int
    optimality_gap_bound: float
    digits: int
    wall_time_s: float


@dataclass(frozen=True)
class CovariateBalance:
    """Balance diagnostics for one covariate.

    Standardized differences divide by the pooled pre-match standard
    deviation (root mean of the two group variances, n-1 each); post-match
    fields are None when the matching is empty.
    """

    name: str
    treated_mean: float
    control_mean_pre: float
    matched_treated_mean: float | None
    matched_control_mean: float | None
    smd_pre: float | None
    smd_post: float | None


@dataclass(frozen=True)
class BalanceReport:
    rows: tuple[CovariateBalance, ...]
    n_treated: int
    n_control: int
    n_pairs: int

    def as_records(self) -> list[dict]:
        return [vars(r).copy() for r in self.rows]


@dataclass(frozen=True)
class MatchResult:
    """A solved matching with id-level records and solver counters."""

    matching: Matching
    pair_records: tuple[tuple[str, str, float], ...]
    total_cost: float
    unmatched_treated_ids: tuple[str, ...]
    unmatched_control_ids: tuple[str, ...]
    balance: BalanceReport | None
    trace: SolveTrace

    @property
    def cardinality(self) -> int:
        return self.matching.cardinality

    def canonical_dict(self) -> dict:
        """Deterministic view of the result: identical inputs and seeds give
        byte-identical JSON (wall time deliberately left out)."""
        return {
            "method": self.trace.method,
            "cardinality": self.cardinality,
            "total_cost": self.total_cost,
            "optimality_gap_bound": self.trace.optimality_gap_bound,
            "pairs": [
                {"treated_id": t, "control_id": c, "cost": w}
                for t, c, w in sorted(self.pair_records)
            ],
            "unmatched_treated_ids": list(self.unmatched_treated_ids),
            "unmatched_control_ids": list(self.unmatched_control_ids),
            "balance": None if self.balance is None else {
                "n_treated": self.balance.n_treated,
                "n_control": self.balance.n_control,
                "n_pairs": self.balance.n_pairs,
                "covariates": self.balance.as_records(),
            },
            "trace": {
                "iterations": self.trace.iterations,
                "augmentations": self.trace.augmentations,
                "cycles_canceled": self.trace.cycles_canceled,
                "digits": self.trace.digits,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.canonical_dict(), indent=2, sort_keys=True)


def _result(
    graph: BipartiteGraph,
    matching: Matching,
    pair_costs: dict[tuple[int, int], float],
    trace: SolveTrace,
    treated_units: Sequence[Unit] | None,
    control_units: Sequence[Unit] | None,
    covariate_names: Sequence[str] | None,
) -> MatchResult:
    records = tuple(
        (graph.treated_ids[i], graph.control_ids[j], pair_costs[(i, j)])
        for i, j in matching.pairs
    )
    total = float(sum(pair_costs[p] for p in matching.pairs))
    matched_t = matching.matched_treated()
    matched_c = matching.matched_controls()
    unmatched_t = tuple(tid for k, tid in enumerate(graph.treated_ids) if k not in matched_t)
    unmatched_c = tuple(cid for k, cid in enumerate(graph.control_ids) if k not in matched_c)
    balance = None
    if treated_units and control_units:
        balance = balance_report(treated_units, control_units, matching, covariate_names)
    return MatchResult(matching, records, total, unmatched_t, unmatched_c, balance, trace)


def run_request(
    graph: BipartiteGraph,
    request: MatchRequest,
    treated_units: Sequence[Unit] | None = None,
    control_units: Sequence[Unit] | None = None,
    covariate_names: Sequence[str] | None = None,
) -> MatchResult:
    """Solve a matching problem as described by ``request``.

    A caliper, when present, is applied to the graph before solving.
    Passing the unit lists (index-aligned with the graph sides) adds a
    covariate balance report to the result.
    """
    if request.caliper is not None:
        graph = apply_caliper(graph, request.caliper)
    t0 = time.perf_counter()

    if request.method == "greedy":
        matching, gtrace = greedy_match(graph, request.greedy)
        lookup = graph.edge_cost_map()
        costs = {p: lookup[p] for p in matching.pairs}
        trace = SolveTrace("greedy", len(gtrace.steps), 0, 0, 0.0, request.digits,
                           time.perf_counter() - t0)
        return _result(graph, matching, costs, trace, treated_units, control_units,
                       covariate_names)

    if request.method == "hungarian":
        kept, _, _, iterations = solve_luap(to_cost_matrix(graph))
        matching = Matching(tuple((i, j) for i, j, _ in kept), WITHOUT_REPLACEMENT, 1)
        costs = {(i, j): w for i, j, w in kept}
        integral = graph.n_edges == 0 or bool(
            np.array_equal(graph.edge_cost, np.floor(graph.edge_cost))
        )
        gap = 0.0 if integral else matching.cardinality * 10.0 ** -6
        trace = SolveTrace("hungarian", iterations, 0, 0, gap, request.digits,
                           time.perf_counter() - t0)
        return _result(graph, matching, costs, trace, treated_units, control_units,
                       covariate_names)

    # optimal-flow
    int_costs, scale = integerize_values(graph.edge_cost, request.digits)
    matching, total_int, mtrace = min_cost_matching(graph, None, costs=int_costs)
    by_pair = {(int(i), int(j)): int(c) for i, j, c in
               zip(graph.edge_treated, graph.edge_control, int_costs)}
    costs = {p: by_pair[p] / scale for p in matching.pairs}
    gap = matching.cardinality * 10.0 ** -request.digits
    trace = SolveTrace("optimal-flow", mtrace.scans, mtrace.augmentations,
                       mtrace.cycles_canceled, gap, request.digits,
                       time.perf_counter() - t0)
    return _result(graph, matching, costs, trace, treated_units, control_units,
                   covariate_names)


def optimal_match(graph: BipartiteGraph, digits: int = 6) -> MatchResult:
    """Cheapest maximum-cardinality matching (integerized at ``digits``)."""
    return run_request(graph, MatchRequest(method="optimal-flow", digits=digits))


def brute_force_oracle(graph: BipartiteGraph, m: int) -> tuple[Matching, float]:
    """Exhaustive minimum over all matchings of cardinality exactly ``m``.

    Only for small instances (at most 25 edges, or at most 8 units on the
    smaller side); anything larger is refused.  Among equal-cost optima
    the lexicographically least pair list is returned.
    """
    n_t, n_c = graph.n_treated, graph.n_control
    if not (graph.n_edges <= 25 or min(n_t, n_c) <= 8):
        raise ValueError(
            "instance too large for the oracle: needs <= 25 edges "
            "or <= 8 units on the smaller side"
        )
    if m < 0:
        raise ValueError("m must be non-negative")
    adj = to_adjacency_list(graph)
    best_cost = float("inf")
    best: list[tuple[int, int]] | None = None
    used = np.zeros(n_c, dtype=bool)
    chosen: list[tuple[int, int]] = []

    def explore(i: int, count: int, cost: float) -> None:
        nonlocal best_cost, best
        if cost >= best_cost:
            return
        if count == m:
            best_cost = cost
            best = chosen.copy()
            return
        if i == n_t or count + (n_t - i) < m:
            return
        for j, w in zip(adj.neighbors[i], adj.costs[i]):
            j = int(j)
            if used[j]:
                continue
            used[j] = True
            chosen.append((i, j))
            explore(i + 1, count + 1, cost + float(w))
            chosen.pop()
            used[j] = False
        explore(i + 1, count, cost)

    explore(0, 0, 0.0)
    if best is None:
        raise ValueError(f"no matching of cardinality {m} exists")
    return Matching(tuple(best), WITHOUT_REPLACEMENT, 1), best_cost


def _smd(diff: float, sd: float | None) -> float | None:
    if sd is not None and np.isfinite(sd) and sd > 0:
        return float(diff / sd)
    return 0.0 if diff == 0 else None


def balance_report(
    treated_units: Sequence[Unit],
    control_units: Sequence[Unit],
    matching: Matching,
    covariate_names: Sequence[str] | None = None,
) -> BalanceReport:
    """Covariate balance before and after matching.

    Unit sequences must be index-aligned with the graph sides the
    matching refers to.  Matched controls are counted with multiplicity,
    so with-replacement reuse weighs a control once per pair.  The SMD
    denominator is the pooled pre-match standard deviation and is held
    fixed between the before and after columns.
    """
    if not treated_units or not control_units:
        raise ValueError("balance needs at least one unit on each side")
    xt = np.array([u.covariates for u in treated_units], dtype=float)
    xc = np.array([u.covariates for u in control_units], dtype=float)
    if xt.shape[1] != xc.shape[1]:
        raise ValueError("treated and control units disagree on covariate length")
    p = xt.shape[1]
    names = [f"x{k + 1}" for k in range(p)] if covariate_names is None else list(covariate_names)
    if len(names) != p:
        raise ValueError(f"expected {p} covariate names, got {len(names)}")

    for i, j in matching.pairs:
        if not 0 <= i < len(treated_units):
            raise ValueError(f"matched treated index {i} has no unit")
        if not 0 <= j < len(control_units):
            raise ValueError(f"matched control index {j} has no unit")

    t_idx = [i for i, _ in matching.pairs]
    c_idx = [j for _, j in matching.pairs]
    have_pairs = len(matching.pairs) > 0
    mt = xt[t_idx] if have_pairs else None
    mc = xc[c_idx] if have_pairs else None

    var_t = np.var(xt, axis=0, ddof=1) if xt.shape[0] > 1 else np.full(p, np.nan)
    var_c = np.var(xc, axis=0, ddof=1) if xc.shape[0] > 1 else np.full(p, np.nan)
    sd_pool = np.sqrt((var_t + var_c) / 2.0)

    rows = []
    for k in range(p):
        t_mean = float(xt[:, k].mean())
        c_mean = float(xc[:, k].mean())
        sd = float(sd_pool[k]) if np.isfinite(sd_pool[k]) else None
        if have_pairs:
            mt_mean = float(mt[:, k].mean())
            mc_mean = float(mc[:, k].mean())
            smd_post = _smd(mt_mean - mc_mean, sd)
        else:
            mt_mean = mc_mean = smd_post = None
        rows.append(CovariateBalance(
            name=names[k],
            treated_mean=t_mean,
            control_mean_pre=c_mean,
            matched_treated_mean=mt_mean,
            matched_control_mean=mc_mean,
            smd_pre=_smd(t_mean - c_mean, sd),
            smd_post=smd_post,
        ))
    return BalanceReport(tuple(rows), len(treated_units), len(control_units),
                         len(matching.pairs))
