"""Core data structures for bipartite matching problems.

Treated and control units are addressed by integer index everywhere inside
the solvers; string identifiers appear only at the I/O boundary and are
carried alongside the index space by :class:`BipartiteGraph`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

WITHOUT_REPLACEMENT = "without-replacement"
WITH_REPLACEMENT = "with-replacement"

__all__ = [
    "WITHOUT_REPLACEMENT",
    "WITH_REPLACEMENT",
    "Unit",
    "BipartiteGraph",
    "CostMatrix",
    "AdjacencyList",
    "Matching",
    "build_graph_from_edges",
    "to_cost_matrix",
    "to_adjacency_list",
    "graph_from_cost_matrix",
    "graph_from_adjacency",
    "matching_total_cost",
    "validate_matching",
]


def _readonly(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Unit:
    """One study unit: an identifier, a treatment flag and covariates.

    Parameters
    ----------
    id : str
        Opaque identifier, unique within a dataset.
    treatment : int
        1 for treated, 0 for control.
    covariates : array-like
        Covariate vector; every unit in a dataset must have the same length.
    score : float, optional
        Scalar summary score (e.g. a fitted propensity), required only by
        metrics that use it.
    response : float, optional
        Outcome value; carried through, never used by the solvers.
    """

    id: str
    treatment: int
    covariates: np.ndarray
    score: float | None = None
    response: float | None = None

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise ValueError(f"unit {self.id!r}: treatment must be 0 or 1, got {self.treatment!r}")
        cov = _readonly(self.covariates, float)
        if cov.ndim != 1:
            raise ValueError(f"unit {self.id!r}: covariates must be one-dimensional")
        if not np.all(np.isfinite(cov)):
            raise ValueError(f"unit {self.id!r}: covariates must be finite")
        object.__setattr__(self, "covariates", cov)


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """A weighted bipartite graph between treated and control units.

    Edges are stored canonically sorted by (treated index, control index)
    in three parallel arrays, so identical edge sets always produce
    identical iteration order regardless of input order.
    """

    treated_ids: tuple[str, ...]
    control_ids: tuple[str, ...]
    edge_treated: np.ndarray
    edge_control: np.ndarray
    edge_cost: np.ndarray

    @property
    def n_treated(self) -> int:
        return len(self.treated_ids)

    @property
    def n_control(self) -> int:
        return len(self.control_ids)

    @property
    def n_edges(self) -> int:
        return int(self.edge_treated.shape[0])

    @classmethod
    def from_indices(
        cls,
        treated_ids: Sequence[str],
        control_ids: Sequence[str],
        edge_treated,
        edge_control,
        edge_cost,
    ) -> "BipartiteGraph":
        """Build a graph from index-based edge arrays, validating everything."""
        treated_ids = tuple(str(t) for t in treated_ids)
        control_ids = tuple(str(c) for c in control_ids)
        for label, ids in (("treated", treated_ids), ("control", control_ids)):
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate {label} ids")

        ti = np.asarray(edge_treated, dtype=np.int64)
        cj = np.asarray(edge_control, dtype=np.int64)
        w = np.asarray(edge_cost, dtype=float)
        if not (ti.shape == cj.shape == w.shape) or ti.ndim != 1:
            raise ValueError("edge arrays must be one-dimensional and equally long")
        if ti.size:
            if ti.min(initial=0) < 0 or (ti >= len(treated_ids)).any():
                raise ValueError("edge references a treated index out of range")
            if cj.min(initial=0) < 0 or (cj >= len(control_ids)).any():
                raise ValueError("edge references a control index out of range")
            if not np.all(np.isfinite(w)) or (w < 0).any():
                raise ValueError("edge costs must be finite and non-negative")

        order = np.lexsort((cj, ti))
        ti, cj, w = ti[order], cj[order], w[order]
        if ti.size > 1:
            dup = (np.diff(ti) == 0) & (np.diff(cj) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(
                    f"duplicate edge ({treated_ids[ti[k]]}, {control_ids[cj[k]]})"
                )
        return cls(treated_ids, control_ids, _readonly(ti, np.int64),
                   _readonly(cj, np.int64), _readonly(w, float))

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield (treated index, control index, cost) in canonical order."""
        for i, j, w in zip(self.edge_treated, self.edge_control, self.edge_cost):
            yield int(i), int(j), float(w)

    def edge_cost_map(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(w)
                for i, j, w in zip(self.edge_treated, self.edge_control, self.edge_cost)}

    def with_costs(self, new_costs) -> "BipartiteGraph":
        """Same topology with replaced edge costs (same canonical order)."""
        w = np.asarray(new_costs, dtype=float)
        if w.shape != self.edge_cost.shape:
            raise ValueError("replacement costs must match the edge count")
        return BipartiteGraph(self.treated_ids, self.control_ids,
                              self.edge_treated, self.edge_control, _readonly(w, float))


def build_graph_from_edges(
    treated_ids: Sequence[str],
    control_ids: Sequence[str],
    edges: Iterable[tuple[str, str, float]],
) -> BipartiteGraph:
    """Build a :class:`BipartiteGraph` from id-based edge triples.

    Parameters
    ----------
    treated_ids, control_ids : sequences of str
        Unit identifiers for each side, in index order.
    edges : iterable of (treated_id, control_id, cost)
        Every id must belong to the matching side; costs must be finite
        and non-negative; duplicate pairs are rejected.
    """
    t_index = {str(t): k for k, t in enumerate(treated_ids)}
    c_index = {str(c): k for k, c in enumerate(control_ids)}
    if len(t_index) != len(treated_ids):
        raise ValueError("duplicate treated ids")
    if len(c_index) != len(control_ids):
        raise ValueError("duplicate control ids")

    ti, cj, w = [], [], []
    for tid, cid, cost in edges:
        if str(tid) not in t_index:
            raise ValueError(f"edge references unknown treated id {tid!r}")
        if str(cid) not in c_index:
            raise ValueError(f"edge references unknown control id {cid!r}")
        ti.append(t_index[str(tid)])
        cj.append(c_index[str(cid)])
        w.append(float(cost))
    return BipartiteGraph.from_indices(treated_ids, control_ids, ti, cj, w)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense cost representation with an explicit edge-presence mask.

    Absent edges hold a sentinel value strictly greater than every real
    cost (max real cost + 1, or 1.0 for an edgeless graph).  The mask is
    authoritative: membership tests must never compare against the
    sentinel value itself.
    """

    values: np.ndarray
    mask: np.ndarray
    sentinel: float

    def __post_init__(self):
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValueError("values and mask must be equal-shape 2-d arrays")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class AdjacencyList:
    """Sparse cost representation: per-treated neighbor and cost vectors.

    Neighbor vectors are sorted by control index; ``costs[i][k]`` is the
    cost of the edge to ``neighbors[i][k]``.
    """

    neighbors: tuple[np.ndarray, ...]
    costs: tuple[np.ndarray, ...]
    n_control: int

    @property
    def n_treated(self) -> int:
        return len(self.neighbors)

    @property
    def n_edges(self) -> int:
        return sum(int(nb.size) for nb in self.neighbors)


def to_cost_matrix(graph: BipartiteGraph) -> CostMatrix:
    """Dense N_T x N_C matrix of the graph with sentinel-filled non-edges."""
    sentinel = float(graph.edge_cost.max()) + 1.0 if graph.n_edges else 1.0
    values = np.full((graph.n_treated, graph.n_control), sentinel, dtype=float)
    mask = np.zeros((graph.n_treated, graph.n_control), dtype=bool)
    values[graph.edge_treated, graph.edge_control] = graph.edge_cost
    mask[graph.edge_treated, graph.edge_control] = True
    values.setflags(write=False)
    mask.setflags(write=False)
    return CostMatrix(values, mask, sentinel)


def to_adjacency_list(graph: BipartiteGraph) -> AdjacencyList:
    """Sparse per-treated-row view of the graph, neighbors sorted ascending."""
    bounds = np.searchsorted(graph.edge_treated, np.arange(graph.n_treated + 1))
    neighbors = []
    costs = []
    for i in range(graph.n_treated):
        lo, hi = bounds[i], bounds[i + 1]
        neighbors.append(_readonly(graph.edge_control[lo:hi], np.int64))
        costs.append(_readonly(graph.edge_cost[lo:hi], float))
    return AdjacencyList(tuple(neighbors), tuple(costs), graph.n_control)


def _default_ids(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{k + 1}" for k in range(n))


def graph_from_cost_matrix(
    matrix: CostMatrix,
    treated_ids: Sequence[str] | None = None,
    control_ids: Sequence[str] | None = None,
) -> BipartiteGraph:
    """Rebuild a graph from a masked cost matrix (inverse of to_cost_matrix)."""
    n_t, n_c = matrix.shape
    treated_ids = _default_ids("T", n_t) if treated_ids is None else treated_ids
    control_ids = _default_ids("C", n_c) if control_ids is None else control_ids
    ti, cj = np.nonzero(matrix.mask)
    return BipartiteGraph.from_indices(treated_ids, control_ids, ti, cj,
                                       matrix.values[ti, cj])


def graph_from_adjacency(
    adjacency: AdjacencyList,
    treated_ids: Sequence[str] | None = None,
    control_ids: Sequence[str] | None = None,
) -> BipartiteGraph:
    """Rebuild a graph from adjacency vectors (inverse of to_adjacency_list)."""
    n_t = adjacency.n_treated
    treated_ids = _default_ids("T", n_t) if treated_ids is None else treated_ids
    control_ids = _default_ids("C", adjacency.n_control) if control_ids is None else control_ids
    ti = np.concatenate([np.full(nb.size, i, dtype=np.int64)
                         for i, nb in enumerate(adjacency.neighbors)]) if n_t else np.empty(0, np.int64)
    cj = np.concatenate(adjacency.neighbors) if n_t else np.empty(0, np.int64)
    w = np.concatenate(adjacency.costs) if n_t else np.empty(0, float)
    return BipartiteGraph.from_indices(treated_ids, control_ids, ti, cj, w)


@dataclass(frozen=True)
class Matching:
    """A set of (treated index, control index) pairs plus its mode.

    ``k`` is the maximum number of controls per treated unit; replacement
    controls whether one control may serve several treated units.
    """

    pairs: tuple[tuple[int, int], ...]
    mode: str = WITHOUT_REPLACEMENT
    k: int = 1

    def __post_init__(self):
        if self.mode not in (WITHOUT_REPLACEMENT, WITH_REPLACEMENT):
            raise ValueError(f"unknown matching mode {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        canon = tuple(sorted((int(i), int(j)) for i, j in self.pairs))
        object.__setattr__(self, "pairs", canon)

    @property
    def cardinality(self) -> int:
        return len(self.pairs)

    def matched_treated(self) -> set[int]:
        return {i for i, _ in self.pairs}

    def matched_controls(self) -> set[int]:
        return {j for _, j in self.pairs}


def matching_total_cost(graph: BipartiteGraph, matching: Matching) -> float:
    """Sum of edge costs over the matching's pairs."""
    lookup = graph.edge_cost_map()
    return float(sum(lookup[p] for p in matching.pairs))


def validate_matching(graph: BipartiteGraph, matching: Matching) -> list[str]:
    """Check every matching invariant against a graph.

    Returns a list of human-readable violation strings, one per breach;
    an empty list means the matching is valid.
    """
    problems: list[str] = []
    edge_set = {(int(i), int(j)) for i, j in zip(graph.edge_treated, graph.edge_control)}

    seen: set[tuple[int, int]] = set()
    treated_count: dict[int, int] = {}
    control_count: dict[int, int] = {}
    for i, j in matching.pairs:
        if not (0 <= i < graph.n_treated):
            problems.append(f"pair ({i}, {j}): treated index {i} out of range")
            continue
        if not (0 <= j < graph.n_control):
            problems.append(f"pair ({i}, {j}): control index {j} out of range")
            continue
        if (i, j) in seen:
            problems.append(f"pair ({i}, {j}) listed more than once")
        seen.add((i, j))
        if (i, j) not in edge_set:
            problems.append(f"pair ({i}, {j}) is not an edge of the graph")
        treated_count[i] = treated_count.get(i, 0) + 1
        control_count[j] = control_count.get(j, 0) + 1

    for i, c in sorted(treated_count.items()):
        if c > matching.k:
            problems.append(f"treated {i} matched {c} times, above the 1:{matching.k} limit")
    if matching.mode == WITHOUT_REPLACEMENT:
        for j, c in sorted(control_count.items()):
            if c > 1:
                problems.append(f"control {j} reused {c} times without replacement")
    return problems
