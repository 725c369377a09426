"""Dissimilarity metrics between treated and control units.

A metric is fitted once on the pooled sample (treated and controls
together, n-1 denominators throughout) and then applied to any pair of
unit sets, so the same scaling is used before and after any caliper or
matching decisions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from typing import Sequence

import numpy as np

from .model import CostMatrix, Unit

METRIC_KINDS = ("euclidean", "standardized-euclidean", "mahalanobis", "score-abs-diff")

_INT64_MAX = np.iinfo(np.int64).max

__all__ = [
    "METRIC_KINDS",
    "MetricSpec",
    "IntegerCosts",
    "fit_metric",
    "pairwise_costs",
    "integerize",
    "integerize_values",
    "thread_count",
]


def thread_count() -> int:
    """Worker cap from MATCHFORGE_THREADS (0 or unset means auto)."""
    raw = os.environ.get("MATCHFORGE_THREADS", "0").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"MATCHFORGE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("MATCHFORGE_THREADS must be non-negative")
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A fitted dissimilarity metric.

    ``transform`` maps covariate rows into a space where plain euclidean
    distance realizes the metric (identity for euclidean, 1/sd scaling for
    standardized euclidean, a whitening matrix for mahalanobis).  Score
    metrics ignore covariates entirely.
    """

    kind: str
    n_covariates: int
    transform: np.ndarray | None = None

    @property
    def uses_scores(self) -> bool:
        return self.kind == "score-abs-diff"


def _covariate_table(units: Sequence[Unit]) -> np.ndarray:
    p = units[0].covariates.shape[0]
    for u in units:
        if u.covariates.shape[0] != p:
            raise ValueError(
                f"unit {u.id!r} has {u.covariates.shape[0]} covariates, expected {p}"
            )
    return np.array([u.covariates for u in units], dtype=float)


def fit_metric(units: Sequence[Unit], kind: str, epsilon: float | None = None) -> MetricSpec:
    """Fit a metric on the pooled sample of units.

    Parameters
    ----------
    units : sequence of Unit
        Treated and control units together; at least two are required.
    kind : str
        One of ``METRIC_KINDS``.
    epsilon : float, optional
        Ridge added to the covariance diagonal before inversion for the
        mahalanobis metric.  Defaults to 1e-8 times the mean diagonal.

    Raises
    ------
    ValueError
        On unknown kind, fewer than two units, ragged covariates, a
        zero-variance covariate under standardized euclidean, a singular
        covariance, or missing scores for the score metric.
    """
    if kind not in METRIC_KINDS:
        raise ValueError(f"unknown metric kind {kind!r}; expected one of {METRIC_KINDS}")
    if len(units) < 2:
        raise ValueError("fitting a metric requires at least two units")
    x = _covariate_table(units)
    p = x.shape[1]

    if kind == "score-abs-diff":
        missing = [u.id for u in units if u.score is None]
        if missing:
            raise ValueError(f"metric needs a score on every unit; missing for {missing[0]!r}")
        return MetricSpec(kind, p)

    if kind == "euclidean":
        return MetricSpec(kind, p)

    if kind == "standardized-euclidean":
        sds = np.std(x, axis=0, ddof=1)
        flat = np.flatnonzero(sds == 0)
        if flat.size:
            raise ValueError(
                f"covariate x{int(flat[0]) + 1} has zero variance; "
                "standardized euclidean is undefined for constant covariates"
            )
        transform = np.diag(1.0 / sds)
        transform.setflags(write=False)
        return MetricSpec(kind, p, transform)

    # mahalanobis
    cov = np.cov(x, rowvar=False, ddof=1).reshape(p, p)
    eps = 1e-8 * float(np.mean(np.diag(cov))) if epsilon is None else float(epsilon)
    reg = cov + eps * np.eye(p)
    try:
        chol = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is singular even after regularization") from None
    transform = np.linalg.inv(chol).T  # rows @ transform whitens the metric
    transform.setflags(write=False)
    return MetricSpec(kind, p, transform)


def _euclidean_block(xt: np.ndarray, xc: np.ndarray, out: np.ndarray) -> None:
    diff = xt[:, None, :] - xc[None, :, :]
    np.sqrt(np.einsum("ijk,ijk->ij", diff, diff), out=out)


def pairwise_costs(
    treated: Sequence[Unit],
    controls: Sequence[Unit],
    spec: MetricSpec,
) -> CostMatrix:
    """All treated-by-control dissimilarities under a fitted metric.

    Rows are computed in independent blocks, optionally across threads
    (capped by MATCHFORGE_THREADS); output is identical either way.
    """
    n_t, n_c = len(treated), len(controls)
    out = np.empty((n_t, n_c), dtype=float)

    if spec.uses_scores:
        for side in (treated, controls):
            for u in side:
                if u.score is None:
                    raise ValueError(f"metric needs a score on every unit; missing for {u.id!r}")
        st = np.array([u.score for u in treated], dtype=float)
        sc = np.array([u.score for u in controls], dtype=float)
        np.abs(st[:, None] - sc[None, :], out=out)
    else:
        xt = _covariate_table(list(treated)) if n_t else np.zeros((0, spec.n_covariates))
        xc = _covariate_table(list(controls)) if n_c else np.zeros((0, spec.n_covariates))
        for x in (xt, xc):
            if x.shape[1] != spec.n_covariates:
                raise ValueError(
                    f"metric was fitted on {spec.n_covariates} covariates, got {x.shape[1]}"
                )
        if spec.transform is not None:
            xt = xt @ spec.transform
            xc = xc @ spec.transform

        workers = min(thread_count(), max(n_t, 1))
        if workers > 1 and n_t >= 64:
            # slice bounds, not index arrays: the workers must write into
            # views of `out`, and fancy indexing would hand them copies
            bounds = np.linspace(0, n_t, workers + 1).astype(int)
            spans = list(zip(bounds[:-1], bounds[1:]))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda s: _euclidean_block(xt[s[0]:s[1]], xc, out[s[0]:s[1]]),
                              spans))
        else:
            _euclidean_block(xt, xc, out)

    out.setflags(write=False)
    mask = np.ones((n_t, n_c), dtype=bool)
    mask.setflags(write=False)
    sentinel = float(out.max()) + 1.0 if out.size else 1.0
    return CostMatrix(out, mask, sentinel)


@dataclass(frozen=True, eq=False)
class IntegerCosts:
    """Integerized costs: values scaled by 10**digits, mask preserved."""

    values: np.ndarray
    mask: np.ndarray
    digits: int
    scale: int
    sentinel: int


def integerize_values(values, digits: int = 6) -> tuple[np.ndarray, int]:
    """Scale by 10**digits and round half away from zero to int64.

    Rounding follows the decimal presentation of each float (shortest
    round-trip repr), so 0.9995 at three digits becomes 1000 even though
    its binary value sits a hair below the midpoint.

    Raises
    ------
    OverflowError
        If any scaled value leaves the int64 range.
    """
    if digits < 0:
        raise ValueError("digits must be non-negative")
    scale = 10 ** digits
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("costs must be finite to integerize")
    x = arr * scale
    # Vectorized half-up is trusted away from the .5 boundary; entries whose
    # float product lands near a midpoint (or too big for exact floats) are
    # re-rounded through Decimal on their decimal presentation.
    frac = x - np.floor(x)
    suspicious = (np.abs(frac - 0.5) <= 1e-6 + np.abs(x) * 1e-12) | (np.abs(x) >= 2.0**52)
    rounded = np.floor(x + 0.5)
    if np.abs(rounded).max(initial=0.0) >= float(_INT64_MAX):
        raise OverflowError(
            f"costs at {digits} digits exceed the 64-bit integer range"
        )
    out = rounded.astype(np.int64)
    if suspicious.any():
        flat = out.reshape(-1)
        src = arr.reshape(-1)
        for k in np.flatnonzero(suspicious.reshape(-1)):
            exact = (Decimal(repr(float(src[k]))) * scale).quantize(
                Decimal(1), rounding=ROUND_HALF_UP
            )
            if not -_INT64_MAX <= exact <= _INT64_MAX:
                raise OverflowError(
                    f"cost {src[k]!r} at {digits} digits exceeds the 64-bit integer range"
                )
            flat[k] = int(exact)
    return out, scale


def integerize(costs: CostMatrix, digits: int = 6) -> IntegerCosts:
    """Integerize a masked cost matrix; absent cells get an integer sentinel."""
    values, scale = integerize_values(np.where(costs.mask, costs.values, 0.0), digits)
    real = values[costs.mask]
    sentinel = int(real.max()) + 1 if real.size else 1
    values = np.where(costs.mask, values, sentinel)
    values.setflags(write=False)
    return IntegerCosts(values, costs.mask, digits, scale, sentinel)
