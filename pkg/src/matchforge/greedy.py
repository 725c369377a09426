"""Greedy nearest-available matching.

Each treated unit, visited in a configurable order, takes its cheapest
eligible control (or the k cheapest) and never reconsiders.  The result
depends on the visiting order; that order dependence is the point of the
order policies, not a defect to hide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    BipartiteGraph,
    Matching,
    to_adjacency_list,
)

ORDER_POLICIES = ("input-order", "random", "max-min-cost-first")

__all__ = ["ORDER_POLICIES", "GreedyConfig", "GreedyTrace", "greedy_match"]


@dataclass(frozen=True)
class GreedyConfig:
    """Greedy policy knobs.

    ``seed`` is required for the random order and rejected otherwise, so a
    call site can never silently depend on an unseeded shuffle.
    """

    order: str = "input-order"
    seed: int | None = None
    k: int = 1
    with_replacement: bool = False

    def __post_init__(self):
        if self.order not in ORDER_POLICIES:
            raise ValueError(f"unknown order policy {self.order!r}; expected one of {ORDER_POLICIES}")
        if (self.seed is not None) != (self.order == "random"):
            raise ValueError("a seed must be given exactly when order='random'")
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class GreedyTrace:
    """Processing order actually used and every pairing step taken."""

    order: tuple[int, ...]
    steps: tuple[tuple[int, int, float], ...]


def _take_cheapest(neighbors, costs, eligible, k):
    """Indices of up to k cheapest eligible neighbors, ties to lowest index."""
    live = eligible[neighbors]
    if not live.any():
        return []
    nb, w = neighbors[live], costs[live]
    order = np.lexsort((nb, w))
    return [(int(nb[t]), float(w[t])) for t in order[: min(k, order.size)]]


def greedy_match(graph: BipartiteGraph, config: GreedyConfig) -> tuple[Matching, GreedyTrace]:
    """Run greedy matching under ``config`` and report the steps taken.

    Treated units whose eligible neighborhoods are empty when their turn
    comes are skipped (they appear in the trace order but contribute no
    pairs).  Control ties always resolve to the lowest control index.
    """
    adj = to_adjacency_list(graph)
    n_t, n_c = graph.n_treated, graph.n_control
    eligible = np.ones(n_c, dtype=bool)
    mode = WITH_REPLACEMENT if config.with_replacement else WITHOUT_REPLACEMENT

    pairs: list[tuple[int, int]] = []
    steps: list[tuple[int, int, float]] = []
    visited: list[int] = []

    def consume(i: int) -> None:
        visited.append(i)
        for j, w in _take_cheapest(adj.neighbors[i], adj.costs[i], eligible, config.k):
            pairs.append((i, j))
            steps.append((i, j, w))
            if not config.with_replacement:
                eligible[j] = False

    if config.order == "max-min-cost-first":
        ti, cj, w = graph.edge_treated, graph.edge_control, graph.edge_cost
        pending = np.ones(n_t, dtype=bool)
        while True:
            live = pending[ti] & eligible[cj] if ti.size else np.zeros(0, bool)
            if not live.any():
                break
            top = np.flatnonzero(live & (w == w[live].max()))
            pick = top[np.lexsort((cj[top], ti[top]))[0]]
            i = int(ti[pick])
            pending[i] = False
            consume(i)
        for i in np.flatnonzero(pending):
            consume(int(i))
    else:
        if config.order == "random":
            order = np.random.default_rng(config.seed).permutation(n_t)
        else:
            order = np.arange(n_t)
        for i in order:
            consume(int(i))

    matching = Matching(tuple(pairs), mode=mode, k=config.k)
    return matching, GreedyTrace(tuple(visited), tuple(steps))
