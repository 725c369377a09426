"""Graph surgery ahead of the solvers: calipers and square padding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import BipartiteGraph, CostMatrix

__all__ = ["apply_caliper", "PaddedProblem", "pad_with_dummies"]


def apply_caliper(graph: BipartiteGraph, omega: float) -> BipartiteGraph:
    """Drop every edge with cost above ``omega``.

    Node sets are kept as-is, so units isolated by the caliper simply end
    up unmatched instead of disappearing from the index space.
    """
    omega = float(omega)
    if not np.isfinite(omega) or omega < 0:
        raise ValueError("caliper must be a finite non-negative number")
    keep = graph.edge_cost <= omega
    return BipartiteGraph(
        graph.treated_ids,
        graph.control_ids,
        graph.edge_treated[keep],
        graph.edge_control[keep],
        graph.edge_cost[keep],
    )


@dataclass(frozen=True, eq=False)
class PaddedProblem:
    """A rectangular masked problem squared up for assignment solvers.

    Dummy rows (and every forbidden real cell) carry ``w_plus``, one more
    than the largest allowed cost.  ``allowed`` records which cells of the
    square matrix are genuine edges; unpadding trusts that mask, never a
    cost comparison, because forbidden cells and dummy rows share the same
    value.
    """

    matrix: np.ndarray
    allowed: np.ndarray
    n_real_rows: int
    w_plus: float
    original_values: np.ndarray

    @property
    def side(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dummy_rows(self) -> tuple[int, ...]:
        return tuple(range(self.n_real_rows, self.side))

    def unpad(
        self, assignment: Iterable[tuple[int, int]]
    ) -> tuple[list[tuple[int, int, float]], list[int]]:
        """Map a square assignment back to real, allowed pairs.

        Returns (kept pairs as (treated, control, original cost),
        structurally unmatched treated indices), where a treated unit is
        structurally unmatched when its assigned cell was a forbidden one.
        """
        rows_seen: set[int] = set()
        kept: list[tuple[int, int, float]] = []
        for r, c in assignment:
            if not (0 <= r < self.side and 0 <= c < self.side):
                raise ValueError(f"assignment cell ({r}, {c}) outside the padded matrix")
            if r in rows_seen:
                raise ValueError(f"assignment uses row {r} twice")
            rows_seen.add(r)
            if r >= self.n_real_rows:
                continue
            if self.allowed[r, c]:
                kept.append((r, c, float(self.original_values[r, c])))
        unmatched = sorted({r for r in range(self.n_real_rows)} - {p[0] for p in kept})
        return kept, unmatched


def pad_with_dummies(costs: CostMatrix) -> PaddedProblem:
    """Square a rectangular masked cost matrix with dummy rows.

    Requires no more rows than columns; transpose the problem first if the
    treated side is the larger one.
    """
    n_t, n_c = costs.shape
    if n_t > n_c:
        raise ValueError(
            f"{n_t} rows exceed {n_c} columns; transpose the problem before padding"
        )
    allowed_vals = costs.values[costs.mask]
    w_plus = float(allowed_vals.max()) + 1.0 if allowed_vals.size else 1.0

    matrix = np.full((n_c, n_c), w_plus, dtype=float)
    matrix[:n_t][costs.mask] = costs.values[costs.mask]
    allowed = np.zeros((n_c, n_c), dtype=bool)
    allowed[:n_t] = costs.mask
    matrix.setflags(write=False)
    allowed.setflags(write=False)
    return PaddedProblem(matrix, allowed, n_t, w_plus, costs.values)
