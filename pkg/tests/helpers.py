"""Shared test utilities: instance builders and exhaustive references."""

from __future__ import annotations

import itertools

import numpy as np
from hypothesis import strategies as st

from matchforge import BipartiteGraph


def make_graph(n_t: int, n_c: int, cells: dict[tuple[int, int], float]) -> BipartiteGraph:
    """Graph with default ids T1.. / C1.. and the given (i, j) -> cost cells."""
    treated = [f"T{i + 1}" for i in range(n_t)]
    controls = [f"C{j + 1}" for j in range(n_c)]
    ti = [i for i, _ in cells]
    cj = [j for _, j in cells]
    w = [cells[p] for p in cells]
    return BipartiteGraph.from_indices(treated, controls, ti, cj, w)


def complete_graph(matrix) -> BipartiteGraph:
    """Complete graph from a dense cost array."""
    m = np.asarray(matrix, dtype=float)
    return make_graph(m.shape[0], m.shape[1],
                      {(i, j): float(m[i, j])
                       for i in range(m.shape[0]) for j in range(m.shape[1])})


def random_graph(
    rng: np.random.Generator,
    n_t: int,
    n_c: int,
    density: float,
    max_cost: int = 100,
    integer: bool = True,
) -> BipartiteGraph:
    """Random instance: each cell kept independently with probability density."""
    keep = rng.random((n_t, n_c)) < density
    ti, cj = np.nonzero(keep)
    if integer:
        w = rng.integers(0, max_cost + 1, size=ti.size).astype(float)
    else:
        w = rng.random(ti.size) * max_cost
    treated = [f"T{i + 1}" for i in range(n_t)]
    controls = [f"C{j + 1}" for j in range(n_c)]
    return BipartiteGraph.from_indices(treated, controls, ti, cj, w)


def max_matching_brute(graph: BipartiteGraph) -> int:
    """Exhaustive maximum matching size (recursion over treated units)."""
    neighbors = [[] for _ in range(graph.n_treated)]
    for i, j, _ in graph.edges():
        neighbors[i].append(j)
    memo: dict[tuple[int, frozenset[int]], int] = {}

    def best(i: int, used: frozenset[int]) -> int:
        if i == graph.n_treated:
            return 0
        key = (i, used)
        if key not in memo:
            top = best(i + 1, used)
            for j in neighbors[i]:
                if j not in used:
                    top = max(top, 1 + best(i + 1, used | {j}))
            memo[key] = top
        return memo[key]

    return best(0, frozenset())


def min_assignment_brute(matrix) -> float:
    """Minimum perfect-assignment cost of a square matrix over all n! orders."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    return min(sum(m[r, perm[r]] for r in range(n))
               for perm in itertools.permutations(range(n)))


def square_int_matrices(max_n: int = 5, max_cost: int = 20):
    """Strategy: square integer cost matrices as nested lists."""
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(
            st.lists(st.integers(0, max_cost), min_size=n, max_size=n),
            min_size=n, max_size=n,
        )
    )


@st.composite
def graph_instances(draw, max_side: int = 6, max_cost: int = 20, integer: bool = True):
    """Strategy: small random bipartite graphs, possibly sparse or edgeless."""
    n_t = draw(st.integers(1, max_side))
    n_c = draw(st.integers(1, max_side))
    all_cells = [(i, j) for i in range(n_t) for j in range(n_c)]
    chosen = draw(st.lists(st.sampled_from(all_cells), unique=True,
                           max_size=len(all_cells)))
    if integer:
        cost = st.integers(0, max_cost)
    else:
        cost = st.floats(0, max_cost, allow_nan=False, allow_infinity=False, width=32)
    cells = {cell: float(draw(cost)) for cell in chosen}
    return make_graph(n_t, n_c, cells)
