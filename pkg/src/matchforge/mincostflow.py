"""Minimum-cost matching at fixed cardinality by negative-cycle canceling.

Starting from any flow of the requested value, the solver repeatedly
builds the costed residual graph, finds negative-cost directed cycles,
and pushes one unit of flow around each; every cancellation lowers the
matching cost by the cycle's (integer) cost while leaving the matching
size untouched, so the loop terminates at an optimum.

Sign convention: a residual edge that undoes used capacity carries the
negated cost of the original edge, so traversing it refunds what the
edge charged.  Source and sink edges carry a configurable unit cost;
because any directed cycle crosses the source (and the sink) as often
forwards as backwards, that choice cancels out and never changes which
matchings are optimal.

Costs must be integers.  Internally the cycle search relaxes against
costs rescaled as ``w * (n + 1) + 1``: the +1 per edge makes every
zero-cost cycle strictly positive, so any cycle assembled from
predecessor pointers is guaranteed strictly negative in original costs,
while no genuinely negative cycle (total <= -1) is lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maxflow import FlowNetwork, augment, build_flow_network, find_augmenting_path
from .model import WITHOUT_REPLACEMENT, BipartiteGraph, Matching

__all__ = [
    "ResidualEdge",
    "NegativeCycle",
    "CostedResidualGraph",
    "MinCostTrace",
    "build_costed_residual",
    "find_negative_cycle",
    "cancel_cycle",
    "min_cost_matching",
]

_ST, _TS, _TC, _CT, _CT_SINK, _TC_SINK = 0, 1, 2, 3, 4, 5
_KIND_NAMES = {_ST: "s>T", _TS: "T>s", _TC: "T>C", _CT: "C>T", _CT_SINK: "C>t", _TC_SINK: "t>C"}


@dataclass(frozen=True)
class ResidualEdge:
    """One residual arc: its kind, the units it touches, its signed cost."""

    kind: str
    treated: int
    control: int
    cost: int


@dataclass(frozen=True)
class NegativeCycle:
    """A directed residual cycle with strictly negative total cost."""

    edges: tuple[ResidualEdge, ...]
    total_cost: int

    def __post_init__(self):
        if self.total_cost >= 0:
            raise ValueError("a negative cycle must have total cost below zero")


@dataclass(frozen=True, eq=False)
class CostedResidualGraph:
    """Residual arcs of a costed flow, flattened for relaxation sweeps."""

    n_nodes: int
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    etype: np.ndarray
    e_treated: np.ndarray
    e_control: np.ndarray
    source_sink_cost: int

    @property
    def n_edges(self) -> int:
        return int(self.tail.shape[0])

    def edge(self, k: int) -> ResidualEdge:
        return ResidualEdge(
            _KIND_NAMES[int(self.etype[k])],
            int(self.e_treated[k]),
            int(self.e_control[k]),
            int(self.cost[k]),
        )


def build_costed_residual(network: FlowNetwork, source_sink_cost: int = 1) -> CostedResidualGraph:
    """Residual graph of the network's current flow.

    Arc order is fixed (source arcs by treated index, pair arcs in
    canonical edge order, sink arcs by control index) so repeated builds
    over the same flow are identical.
    """
    if network.edge_costs is None:
        raise ValueError("network has no costs; build it with integer edge costs")
    ssc = int(source_sink_cost)
    n_t, n_c = network.n_treated, network.n_control
    mt = np.asarray(network.match_t, dtype=np.int64)
    mc = np.asarray(network.match_c, dtype=np.int64)
    ti = network.edge_treated
    cj = network.edge_control
    w = network.edge_costs

    s = 0
    t = 1 + n_t + n_c
    t_nodes = 1 + np.arange(n_t, dtype=np.int64)
    c_nodes = 1 + n_t + np.arange(n_c, dtype=np.int64)

    t_matched = mt != -1
    s_tail = np.where(t_matched, t_nodes, s)
    s_head = np.where(t_matched, s, t_nodes)
    s_cost = np.where(t_matched, -ssc, ssc).astype(np.int64)
    s_type = np.where(t_matched, _TS, _ST).astype(np.int8)

    used = mt[ti] == cj
    p_tail = np.where(used, c_nodes[cj], t_nodes[ti])
    p_head = np.where(used, t_nodes[ti], c_nodes[cj])
    p_cost = np.where(used, -w, w).astype(np.int64)
    p_type = np.where(used, _CT, _TC).astype(np.int8)

    c_matched = mc != -1
    k_tail = np.where(c_matched, t, c_nodes)
    k_head = np.where(c_matched, c_nodes, t)
    k_cost = np.where(c_matched, -ssc, ssc).astype(np.int64)
    k_type = np.where(c_matched, _TC_SINK, _CT_SINK).astype(np.int8)

    minus = np.full(n_t, -1, dtype=np.int64)
    minus_c = np.full(n_c, -1, dtype=np.int64)
    return CostedResidualGraph(
        n_nodes=n_t + n_c + 2,
        tail=np.concatenate([s_tail, p_tail, k_tail]),
        head=np.concatenate([s_head, p_head, k_head]),
        cost=np.concatenate([s_cost, p_cost, k_cost]),
        etype=np.concatenate([s_type, p_type, k_type]),
        e_treated=np.concatenate([np.arange(n_t, dtype=np.int64), ti, minus_c]),
        e_control=np.concatenate([minus, cj, np.arange(n_c, dtype=np.int64)]),
        source_sink_cost=ssc,
    )


def _pred_cycles(pred: np.ndarray, edge_tail: np.ndarray, n: int) -> list[list[int]]:
    """All node-disjoint cycles in the predecessor graph, as edge-id lists."""
    nodes = np.arange(n, dtype=np.int64)
    succ = np.where(pred >= 0, edge_tail[np.where(pred >= 0, pred, 0)], nodes)
    land = succ.copy()
    hops = 1
    while hops < n:
        land = land[land]
        hops *= 2
    on_cycle = np.unique(land[succ[land] != land])

    cycles: list[list[int]] = []
    seen = np.zeros(n, dtype=bool)
    for start in on_cycle:
        start = int(start)
        if seen[start]:
            continue
        walk = []
        v = start
        while not seen[v]:
            seen[v] = True
            walk.append(v)
            v = int(succ[v])
        if v not in walk:
            continue  # drained into an earlier cycle
        cycle_nodes = walk[walk.index(v):]
        # pred edges point backwards along the cycle; reverse for forward order
        cycles.append([int(pred[u]) for u in reversed(cycle_nodes)])
    return cycles


def _negative_cycle_batch(res: CostedResidualGraph) -> list[list[int]]:
    """Node-disjoint negative cycles, or [] when none exist.

    Synchronous relaxation rounds from an implicit everywhere-source
    (all distances start at zero).  Ties pick the lowest arc id, so the
    outcome is a pure function of the residual graph.  Once a cycle is
    detected the sweep keeps relaxing for a fixed window of extra rounds
    so more disjoint predecessor cycles can mature before the harvest;
    every extraction refers to the same residual, so any harvest stays
    cancelable.
    """
    n = res.n_nodes
    if res.n_edges == 0:
        return []
    max_w = int(np.abs(res.cost).max(initial=0))
    if (max_w * (n + 1) + 1) > (2**62) // max(n, 1):
        raise OverflowError("costs too large for exact cycle search; use fewer digits")
    w_adj = res.cost * (n + 1) + 1

    order = np.argsort(res.head, kind="stable")
    eu_s = res.tail[order]
    w_s = w_adj[order]
    ev_s = res.head[order]
    group_starts = np.flatnonzero(np.r_[True, np.diff(ev_s) > 0])
    group_heads = ev_s[group_starts]
    group_sizes = np.diff(np.r_[group_starts, ev_s.size])
    eid_s = order.astype(np.int64)
    big = np.iinfo(np.int64).max

    dist = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    first_batch: list[list[int]] | None = None
    # every extra round costs O(E), so sparse residuals can afford a far
    # longer maturation window than dense ones before the harvest; past
    # n rounds nothing new can form, so n caps the window
    window = max(4, min(1_000_000 // res.n_edges, n))
    deadline = 0
    converged = False
    for round_no in range(2 * n + 4 + window):
        cand = dist[eu_s] + w_s
        gmin = np.minimum.reduceat(cand, group_starts)
        improved = gmin < dist[group_heads]
        if not improved.any():
            converged = True
            break
        is_min = cand == np.repeat(gmin, group_sizes)
        gwin = np.minimum.reduceat(np.where(is_min, eid_s, big), group_starts)
        heads = group_heads[improved]
        dist[heads] = gmin[improved]
        pred[heads] = gwin[improved]
        if first_batch is None:
            cycles = _pred_cycles(pred, res.tail, n)
            if cycles:
                first_batch = cycles
                deadline = round_no + window
        elif round_no >= deadline:
            break
    if first_batch is None:
        if converged:
            return []
        raise AssertionError("relaxation persisted without a predecessor cycle")
    late = _pred_cycles(pred, res.tail, n)
    return late if len(late) >= len(first_batch) else first_batch


def _to_negative_cycle(res: CostedResidualGraph, edge_ids: list[int]) -> NegativeCycle:
    edges = tuple(res.edge(k) for k in edge_ids)
    return NegativeCycle(edges, int(sum(e.cost for e in edges)))


def find_negative_cycle(res: CostedResidualGraph) -> NegativeCycle | None:
    """One negative-cost residual cycle, or None iff the flow is optimal
    among flows of its value."""
    batch = _negative_cycle_batch(res)
    if not batch:
        return None
    return _to_negative_cycle(res, batch[0])


def cancel_cycle(network: FlowNetwork, cycle: NegativeCycle) -> None:
    """Push one unit of flow around a residual cycle, in place.

    Every arc is checked against the current flow first; a cycle that
    no longer matches the flow state is rejected untouched.
    """
    to_set: list[tuple[int, int]] = []
    to_clear: list[tuple[int, int]] = []
    for e in cycle.edges:
        if e.kind == "T>C":
            if network.match_t[e.treated] == e.control:
                raise ValueError(f"arc ({e.treated}, {e.control}) already carries flow")
            if not network.has_edge(e.treated, e.control):
                raise ValueError(f"arc ({e.treated}, {e.control}) is not a network edge")
            to_set.append((e.treated, e.control))
        elif e.kind == "C>T":
            if network.match_t[e.treated] != e.control:
                raise ValueError(f"arc ({e.treated}, {e.control}) carries no flow to undo")
            to_clear.append((e.treated, e.control))
        elif e.kind == "s>T":
            if network.match_t[e.treated] != -1:
                raise ValueError(f"treated {e.treated} is not free")
        elif e.kind == "T>s":
            if network.match_t[e.treated] == -1:
                raise ValueError(f"treated {e.treated} carries no source flow")
        elif e.kind == "C>t":
            if network.match_c[e.control] != -1:
                raise ValueError(f"control {e.control} is not free")
        elif e.kind == "t>C":
            if network.match_c[e.control] == -1:
                raise ValueError(f"control {e.control} carries no sink flow")
        else:
            raise ValueError(f"unknown residual arc kind {e.kind!r}")

    for i, j in to_clear:
        network.match_t[i] = -1
        network.match_c[j] = -1
    for i, j in to_set:
        if network.match_t[i] != -1 or network.match_c[j] != -1:
            raise ValueError("cycle is inconsistent with the current flow")
        network.match_t[i] = j
        network.match_c[j] = i


@dataclass(frozen=True)
class MinCostTrace:
    """Counters and the per-cancellation cost history of one solve."""

    augmentations: int
    scans: int
    cycles_canceled: int
    initial_cost: int
    final_cost: int
    cost_history: tuple[int, ...]
    cardinality_history: tuple[int, ...]


def _integer_edge_costs(graph: BipartiteGraph) -> np.ndarray:
    w = graph.edge_cost
    if w.size and not np.array_equal(w, np.floor(w)):
        raise ValueError("edge costs must be integers; integerize them first")
    return w.astype(np.int64)


def min_cost_matching(
    graph: BipartiteGraph,
    m: int | None,
    source_sink_cost: int = 1,
    costs=None,
) -> tuple[Matching, int, MinCostTrace]:
    """Cheapest matching of cardinality exactly ``m``.

    Builds a maximum flow first, trims it down to ``m`` by dropping the
    priciest pairs, then cancels negative cycles until none remain.
    ``m=None`` keeps the maximum matching size.  Raises if ``m`` exceeds
    that size or if any edge cost is not an integer.  ``costs`` may
    supply the integer edge costs directly (canonical edge order),
    bypassing the float view of the graph.
    """
    if m is not None and m < 0:
        raise ValueError("m must be non-negative")
    if costs is None:
        w = _integer_edge_costs(graph)
    else:
        w = np.asarray(costs, dtype=np.int64)
        if w.shape != graph.edge_treated.shape:
            raise ValueError("costs must align with the graph's edge arrays")
    net = build_flow_network(graph, w)
    augmentations = 0
    while True:
        path = find_augmenting_path(net)
        if path is None:
            break
        augment(net, path)
        augmentations += 1
    m_max = net.flow_value()
    if m is None:
        m = m_max
    if m > m_max:
        raise ValueError(f"requested cardinality {m} exceeds the maximum matching size {m_max}")

    cost_of = {(int(i), int(j)): int(c) for i, j, c in
               zip(graph.edge_treated, graph.edge_control, w)}
    if m < m_max:
        drop = sorted(net.pairs(), key=lambda p: (-cost_of[p], p))[: m_max - m]
        for i, j in drop:
            net.match_t[i] = -1
            net.match_c[j] = -1

    total = sum(cost_of[p] for p in net.pairs())
    history = [total]
    cards = [net.flow_value()]
    scans = 0
    cycles_canceled = 0
    initial = total
    while True:
        res = build_costed_residual(net, source_sink_cost)
        scans += 1
        batch = _negative_cycle_batch(res)
        if not batch:
            break
        for edge_ids in batch:
            cycle = _to_negative_cycle(res, edge_ids)
            cancel_cycle(net, cycle)
            total += cycle.total_cost
            cycles_canceled += 1
            history.append(total)
            cards.append(net.flow_value())

    matching = Matching(tuple(net.pairs()), mode=WITHOUT_REPLACEMENT, k=1)
    trace = MinCostTrace(
        augmentations=augmentations,
        scans=scans,
        cycles_canceled=cycles_canceled,
        initial_cost=initial,
        final_cost=total,
        cost_history=tuple(history),
        cardinality_history=tuple(cards),
    )
    return matching, total, trace
