"""Assignment by matrix reduction (the Hungarian method).

The square solver repeatedly reduces the working matrix, covers its zeros
with a minimum number of lines, and shifts mass off the uncovered cells
until the zeros admit a perfect assignment.  All arithmetic happens on
integers: float inputs are integerized up front so zero tests are exact
and termination follows from strictly decreasing integer totals.

Rectangular or partially forbidden problems go through ``solve_luap``,
which squares them up with dummy rows before solving and strips the
padding from the answer afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import integerize_values
from .model import CostMatrix
from .transforms import pad_with_dummies

__all__ = [
    "ReducedMatrix",
    "reduce_rows_then_cols",
    "min_line_cover",
    "adjust_uncovered",
    "hungarian_solve",
    "solve_luap",
]


@dataclass(frozen=True, eq=False)
class ReducedMatrix:
    """Integer working matrix plus the current line cover over its zeros."""

    matrix: np.ndarray
    covered_rows: np.ndarray
    covered_cols: np.ndarray

    @property
    def n_lines(self) -> int:
        return int(self.covered_rows.sum() + self.covered_cols.sum())


def _as_integer_matrix(w) -> np.ndarray:
    arr = np.asarray(w)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square cost matrix")
    if arr.size and not np.all(np.isfinite(np.asarray(arr, dtype=float))):
        raise ValueError("costs must be finite")
    if arr.size and np.asarray(arr, dtype=float).min() < 0:
        raise ValueError("costs must be non-negative")
    if not np.issubdtype(arr.dtype, np.integer):
        as_float = np.asarray(arr, dtype=float)
        if not np.array_equal(as_float, np.floor(as_float)):
            raise ValueError("reduction steps need integer costs; integerize first")
        arr = as_float
    return arr.astype(np.int64)


def reduce_rows_then_cols(w) -> ReducedMatrix:
    """Subtract each row's minimum, then each column's minimum."""
    m = _as_integer_matrix(w)
    if m.size:
        m = m - m.min(axis=1, keepdims=True)
        m = m - m.min(axis=0, keepdims=True)
    n = m.shape[0]
    m.setflags(write=False)
    return ReducedMatrix(m, np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))


def _max_matching(zeros: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximum bipartite matching over the zero pattern (rows to columns).

    Deterministic: rows are processed ascending, columns scanned ascending,
    augmenting paths found breadth-first.
    """
    n_r, n_c = zeros.shape
    cols_of = [np.flatnonzero(zeros[r]) for r in range(n_r)]
    match_row = np.full(n_r, -1, dtype=np.int64)
    match_col = np.full(n_c, -1, dtype=np.int64)

    for r0 in range(n_r):
        parent = np.full(n_c, -1, dtype=np.int64)
        queue = [r0]
        qi = 0
        found = -1
        while qi < len(queue) and found < 0:
            r = queue[qi]
            qi += 1
            for c in cols_of[r]:
                c = int(c)
                if parent[c] >= 0:
                    continue
                parent[c] = r
                if match_col[c] < 0:
                    found = c
                    break
                queue.append(int(match_col[c]))
        if found < 0:
            continue
        c = found
        while True:
            r = int(parent[c])
            c_prev = int(match_row[r])
            match_row[r] = c
            match_col[c] = r
            if r == r0:
                break
            c = c_prev
    return match_row, match_col


def min_line_cover(zeros: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimum set of row/column lines covering every zero.

    Built from a maximum matching on the zeros: rows never reached by an
    alternating path from an unmatched row, plus columns that are reached,
    cover all zeros with as many lines as the matching has edges.
    """
    zeros = np.asarray(zeros, dtype=bool)
    n_r, n_c = zeros.shape
    match_row, match_col = _max_matching(zeros)

    reach_row = match_row < 0
    reach_col = np.zeros(n_c, dtype=bool)
    frontier = list(np.flatnonzero(reach_row))
    while frontier:
        nxt: list[int] = []
        for r in frontier:
            for c in np.flatnonzero(zeros[r]):
                c = int(c)
                if reach_col[c]:
                    continue
                reach_col[c] = True
                r2 = int(match_col[c])
                if r2 >= 0 and not reach_row[r2]:
                    reach_row[r2] = True
                    nxt.append(r2)
        frontier = nxt

    covered_rows = ~reach_row
    covered_cols = reach_col
    return covered_rows, covered_cols, int((match_row >= 0).sum())


def adjust_uncovered(reduced: ReducedMatrix) -> ReducedMatrix:
    """Shift the smallest uncovered value out of the uncovered region.

    Subtracts it from every uncovered cell and adds it to every doubly
    covered cell, preserving the optimal assignment set while creating at
    least one new zero.  Refuses to run on a complete cover.
    """
    n = reduced.matrix.shape[0]
    if reduced.n_lines >= n:
        raise ValueError("cover is already complete; nothing to adjust")
    open_rows = ~reduced.covered_rows
    open_cols = ~reduced.covered_cols
    uncovered = np.outer(open_rows, open_cols)
    if not uncovered.any():
        raise ValueError("no uncovered cells to adjust")
    delta = int(reduced.matrix[uncovered].min())
    m = reduced.matrix.copy()
    m[uncovered] -= delta
    m[np.outer(~open_rows, ~open_cols)] += delta
    m.setflags(write=False)
    return ReducedMatrix(m, np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))


def _lex_min_assignment(zeros: np.ndarray) -> list[tuple[int, int]]:
    """Lexicographically least perfect assignment within the zero pattern."""
    n = zeros.shape[0]
    avail = np.ones(n, dtype=bool)
    chosen: list[tuple[int, int]] = []
    for r in range(n):
        for c in np.flatnonzero(zeros[r] & avail):
            c = int(c)
            rest = zeros[r + 1 :][:, avail & (np.arange(n) != c)]
            _, mc = _max_matching(rest)
            if int((mc >= 0).sum()) == n - r - 1:
                chosen.append((r, c))
                avail[c] = False
                break
        else:
            raise RuntimeError("zero pattern admits no perfect assignment")
    return chosen


def hungarian_solve(w) -> tuple[tuple[tuple[int, int], ...], float, int]:
    """Minimum-cost perfect assignment of a square cost matrix.

    Returns (assignment pairs, total cost on the input scale, number of
    adjustment iterations).  Float matrices are integerized at six digits
    internally; the reported total is the sum of the original entries of
    the chosen cells.
    """
    original = np.asarray(w, dtype=float)
    if original.ndim != 2 or original.shape[0] != original.shape[1]:
        raise ValueError("expected a square cost matrix")
    n = original.shape[0]
    if n == 0:
        return (), 0.0, 0
    if not np.all(np.isfinite(original)) or original.min() < 0:
        raise ValueError("costs must be finite and non-negative")

    if np.array_equal(original, np.floor(original)):
        work = original.astype(np.int64)
    else:
        work, _ = integerize_values(original, 6)

    reduced = reduce_rows_then_cols(work)
    iterations = 0
    while True:
        rows, cols, size = min_line_cover(reduced.matrix == 0)
        reduced = ReducedMatrix(reduced.matrix, rows, cols)
        if size >= n:
            break
        reduced = adjust_uncovered(reduced)
        iterations += 1

    assignment = tuple(_lex_min_assignment(reduced.matrix == 0))
    total = float(sum(original[r, c] for r, c in assignment))
    return assignment, total, iterations


def solve_luap(
    costs: CostMatrix,
) -> tuple[list[tuple[int, int, float]], float, list[int], int]:
    """Assignment for rectangular, possibly forbidden-cell problems.

    Pads to square with dummy rows, solves, and strips every pair that
    touches a dummy row or a forbidden cell.  Returns (kept pairs with
    their original costs, their total, structurally unmatched treated
    indices, adjustment iterations).
    """
    n_t, n_c = costs.shape
    if n_t > n_c:
        raise ValueError(
            f"{n_t} treated rows exceed {n_c} controls; transpose the problem first"
        )
    padded = pad_with_dummies(costs)
    assignment, _, iterations = hungarian_solve(padded.matrix)
    kept, unmatched = padded.unpad(assignment)
    total = float(sum(c for _, _, c in kept))
    return kept, total, unmatched, iterations
