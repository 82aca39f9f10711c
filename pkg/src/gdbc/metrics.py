"""Evaluation statistics: Pearson, Spearman, tie-corrected Kendall, MSE, delta%."""

from __future__ import annotations

import numpy as np

from .kernels import get_kernels

_KENDALL_COUNTS = get_kernels()["kendall_counts"]


def _as_pair(predicted, reference) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if p.ndim != 1 or p.shape != r.shape:
        raise ValueError("score pairs must be equal-length 1-D vectors")
    if p.size == 0:
        raise ValueError("score pairs must be nonempty")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
        raise ValueError("score pairs must be finite")
    return p, r


def mse(predicted, reference) -> float:
    """Mean squared difference."""
    p, r = _as_pair(predicted, reference)
    return float(np.mean((p - r) ** 2))


def plcc(predicted, reference) -> float:
    """Pearson linear correlation; errors on degenerate (zero-variance) input."""
    p, r = _as_pair(predicted, reference)
    if p.size < 2:
        raise ValueError("plcc needs at least 2 pairs")
    pc = p - p.mean()
    rc = r - r.mean()
    denom = np.sqrt((pc * pc).sum() * (rc * rc).sum())
    if denom == 0.0:
        raise ValueError("degenerate input: zero variance on one side")
    return float((pc * rc).sum() / denom)


def rankdata_average(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(predicted, reference) -> float:
    """Spearman rank correlation (Pearson over average ranks)."""
    p, r = _as_pair(predicted, reference)
    if p.size < 2:
        raise ValueError("srcc needs at least 2 pairs")
    return plcc(rankdata_average(p), rankdata_average(r))


def krcc(predicted, reference) -> float:
    """Kendall tau-b, computed by exact pair counting."""
    p, r = _as_pair(predicted, reference)
    n = p.size
    if n < 2:
        raise ValueError("krcc needs at least 2 pairs")
    conc, disc, tx, ty, txy = _KENDALL_COUNTS(
        np.ascontiguousarray(p), np.ascontiguousarray(r)
    )
    n0 = n * (n - 1) // 2
    n1 = tx + txy
    n2 = ty + txy
    denom = np.sqrt(float(n0 - n1) * float(n0 - n2))
    if denom == 0.0:
        raise ValueError("degenerate input: one side is fully tied")
    return float((conc - disc) / denom)


def delta_percent(with_gdbc: float, without_gdbc: float) -> float:
    """Relative improvement (with - without) / without * 100."""
    if without_gdbc == 0.0:
        raise ValueError("zero baseline metric, delta percent undefined")
    return (with_gdbc - without_gdbc) / without_gdbc * 100.0
