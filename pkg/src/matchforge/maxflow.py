"""Maximum-cardinality matching as unit-capacity flow.

The network has a source feeding every treated node, an edge per allowed
pair, and every control draining into a sink, all with capacity one.
Augmenting paths are found breadth-first from the source, scanning
neighbors in ascending index order, so runs are reproducible; each
augmentation raises the flow value by exactly one, and the number of
augmentations equals the final matching size.

Flow is stored as the pair of partner arrays (treated -> control,
control -> treated); source and sink edge flows follow from whether a
node has a partner, which keeps conservation automatic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import BipartiteGraph

__all__ = [
    "FlowNetwork",
    "ResidualView",
    "MaxCardResult",
    "build_flow_network",
    "find_augmenting_path",
    "augment",
    "max_cardinality",
]

_FREE = -1


@dataclass(eq=False)
class FlowNetwork:
    """Unit-capacity network over a bipartite graph, with mutable flow.

    Node ids: 0 is the source, ``1 + i`` a treated unit, ``1 + n_treated
    + j`` a control, and the last id the sink.
    """

    n_treated: int
    n_control: int
    adj: list[list[int]]
    edge_treated: np.ndarray | None = None
    edge_control: np.ndarray | None = None
    edge_costs: np.ndarray | None = None
    match_t: list[int] = field(default_factory=list)
    match_c: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.match_t:
            self.match_t = [_FREE] * self.n_treated
        if not self.match_c:
            self.match_c = [_FREE] * self.n_control

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return 1 + self.n_treated + self.n_control

    @property
    def n_nodes(self) -> int:
        return self.n_treated + self.n_control + 2

    def treated_node(self, i: int) -> int:
        return 1 + i

    def control_node(self, j: int) -> int:
        return 1 + self.n_treated + j

    def describe(self, node: int) -> tuple[str, int]:
        """Classify a node id as ('s'|'T'|'C'|'t', index)."""
        if node == 0:
            return "s", 0
        if node == self.sink:
            return "t", 0
        if 1 <= node <= self.n_treated:
            return "T", node - 1
        if self.n_treated < node < self.sink:
            return "C", node - 1 - self.n_treated
        raise ValueError(f"node id {node} outside the network")

    def flow_value(self) -> int:
        return len(self.match_t) - self.match_t.count(_FREE)

    def has_edge(self, i: int, j: int) -> bool:
        row = self.adj[i]
        lo = int(np.searchsorted(np.asarray(row), j)) if row else 0
        return lo < len(row) and row[lo] == j

    def edge_flow(self, i: int, j: int) -> int:
        return 1 if self.match_t[i] == j else 0

    def pairs(self) -> list[tuple[int, int]]:
        return sorted((i, j) for i, j in enumerate(self.match_t) if j != _FREE)

    def check_flow(self) -> list[str]:
        """Capacity and conservation violations, empty when the flow is sound."""
        problems: list[str] = []
        for i, j in enumerate(self.match_t):
            if j == _FREE:
                continue
            if not (0 <= j < self.n_control):
                problems.append(f"treated {i} assigned to control index {j} out of range")
            elif self.match_c[j] != i:
                problems.append(f"treated {i} and control {j} disagree on their pairing")
            elif not self.has_edge(i, j):
                problems.append(f"flow on ({i}, {j}) which is not a network edge")
        for j, i in enumerate(self.match_c):
            if i != _FREE and self.match_t[i] != j:
                problems.append(f"control {j} claims treated {i} which points elsewhere")
        return problems


@dataclass(frozen=True, eq=False)
class ResidualView:
    """Residual capacities derived on demand from a network's flow."""

    network: FlowNetwork

    def capacity(self, u: int, v: int) -> int:
        net = self.network
        ku, iu = net.describe(u)
        kv, iv = net.describe(v)
        if ku == "s" and kv == "T":
            return 1 if net.match_t[iv] == _FREE else 0
        if ku == "T" and kv == "s":
            return 1 if net.match_t[iu] != _FREE else 0
        if ku == "T" and kv == "C":
            if not net.has_edge(iu, iv):
                return 0
            return 0 if net.match_t[iu] == iv else 1
        if ku == "C" and kv == "T":
            return 1 if net.has_edge(iv, iu) and net.match_t[iv] == iu else 0
        if ku == "C" and kv == "t":
            return 1 if net.match_c[iu] == _FREE else 0
        if ku == "t" and kv == "C":
            return 1 if net.match_c[iv] != _FREE else 0
        return 0


def build_flow_network(graph: BipartiteGraph, costs=None) -> FlowNetwork:
    """Network for a graph; optional per-edge costs ride along in canonical order."""
    if costs is not None:
        costs = np.asarray(costs, dtype=np.int64)
        if costs.shape != graph.edge_treated.shape:
            raise ValueError("costs must align with the graph's edge arrays")
    ti = graph.edge_treated
    cj = graph.edge_control
    bounds = np.searchsorted(ti, np.arange(graph.n_treated + 1))
    adj = [cj[bounds[i]:bounds[i + 1]].tolist() for i in range(graph.n_treated)]
    return FlowNetwork(graph.n_treated, graph.n_control, adj,
                       edge_treated=ti, edge_control=cj, edge_costs=costs)


def find_augmenting_path(network: FlowNetwork) -> list[int] | None:
    """Shortest residual source-to-sink path, or None when flow is maximum.

    Breadth-first from the source; the sink test fires as soon as a free
    control is generated, which stays within the earliest possible level.
    """
    net = network
    match_t, match_c, adj = net.match_t, net.match_c, net.adj
    parent_of_control = [_FREE - 1] * net.n_control  # discovering treated, or unseen
    parent_of_treated = [_FREE - 1] * net.n_treated  # discovering control, -1 for source
    queue: list[int] = []
    for i in range(net.n_treated):
        if match_t[i] == _FREE:
            parent_of_treated[i] = _FREE
            queue.append(i)

    end_control = _FREE - 1
    qi = 0
    while qi < len(queue) and end_control < 0:
        i = queue[qi]
        qi += 1
        own = match_t[i]
        for j in adj[i]:
            if j == own or parent_of_control[j] >= _FREE:
                continue
            parent_of_control[j] = i
            partner = match_c[j]
            if partner == _FREE:
                end_control = j
                break
            if parent_of_treated[partner] < _FREE:
                parent_of_treated[partner] = j
                queue.append(partner)

    if end_control < 0:
        return None
    nodes = [net.sink]
    j = end_control
    while True:
        nodes.append(net.control_node(j))
        i = parent_of_control[j]
        nodes.append(net.treated_node(i))
        if parent_of_treated[i] == _FREE:
            break
        j = parent_of_treated[i]
    nodes.append(net.source)
    nodes.reverse()
    return nodes


def augment(network: FlowNetwork, path: list[int]) -> FlowNetwork:
    """Push one unit of flow along a residual path, in place.

    The path must run from source to sink with residual capacity one on
    every hop; the flow value afterwards is exactly one higher.
    """
    net = network
    if len(path) < 4 or path[0] != net.source or path[-1] != net.sink:
        raise ValueError("augmenting path must run from the source to the sink")
    to_set: list[tuple[int, int]] = []
    to_clear: list[tuple[int, int]] = []
    for u, v in zip(path[1:-2], path[2:-1]):
        ku, iu = net.describe(u)
        kv, iv = net.describe(v)
        if ku == "T" and kv == "C":
            if not net.has_edge(iu, iv) or net.match_t[iu] == iv:
                raise ValueError(f"no forward residual capacity on ({iu}, {iv})")
            to_set.append((iu, iv))
        elif ku == "C" and kv == "T":
            if net.match_t[iv] != iu:
                raise ValueError(f"no backward residual capacity on ({iv}, {iu})")
            to_clear.append((iv, iu))
        else:
            raise ValueError("interior of the path must alternate treated and control nodes")
    first = net.describe(path[1])
    if first[0] != "T" or net.match_t[first[1]] != _FREE:
        raise ValueError("path must leave the source through a free treated node")
    last = net.describe(path[-2])
    if last[0] != "C" or net.match_c[last[1]] != _FREE:
        raise ValueError("path must reach the sink through a free control node")

    for i, j in to_clear:
        net.match_t[i] = _FREE
        net.match_c[j] = _FREE
    for i, j in to_set:
        net.match_t[i] = j
        net.match_c[j] = i
    return net


@dataclass(frozen=True, eq=False)
class MaxCardResult:
    """Maximum matching size, the augmentation count, and the final network."""

    value: int
    augmentations: int
    network: FlowNetwork


def max_cardinality(graph: BipartiteGraph) -> MaxCardResult:
    """Maximum matching size by repeated augmentation from the empty flow."""
    net = build_flow_network(graph)
    augmentations = 0
    while True:
        path = find_augmenting_path(net)
        if path is None:
            break
        augment(net, path)
        augmentations += 1
    return MaxCardResult(net.flow_value(), augmentations, net)
