"""Competing label-cleanup and robust-loss baselines.

Three screening procedures operate on a subjects-by-samples opinion matrix
(NaN marks a missing vote): outlier-count subject rejection in the BT.500
style, an alternating maximum-likelihood fit of per-subject bias and
inconsistency, and plain per-subject constant-bias removal. Two robust
classification losses (generalized and symmetric cross entropy) target the
binned score head. All are one-stop post-processing or loss swaps; none of
them iterate with the model the way calibration does.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class SubjectMatrix:
    """Dense subjects-by-samples score matrix; NaN entries are missing votes."""

    scores: np.ndarray
    subject_ids: list[str]
    sample_ids: list[str]

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ValueError("scores must be a 2-D subjects-by-samples matrix")
        s, n = self.scores.shape
        if len(self.subject_ids) != s or len(self.sample_ids) != n:
            raise ValueError("id lists must match the matrix shape")

    @property
    def n_subjects(self) -> int:
        return self.scores.shape[0]

    @property
    def n_samples(self) -> int:
        return self.scores.shape[1]

    def require_screenable(self) -> None:
        if self.n_subjects < 2 or self.n_samples < 2:
            raise ValueError("screening needs at least 2 subjects and 2 samples")

    def to_csv(self, path: str | Path) -> None:
        """Header row of sample ids; one row per subject; blank cells = missing."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", *self.sample_ids])
            for s, sid in enumerate(self.subject_ids):
                row = [sid]
                for v in self.scores[s]:
                    row.append("" if np.isnan(v) else repr(float(v)))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path) -> "SubjectMatrix":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty subject matrix")
        sample_ids = rows[0][1:]
        subject_ids = []
        scores = []
        for row in rows[1:]:
            subject_ids.append(row[0])
            scores.append([np.nan if cell == "" else float(cell) for cell in row[1:]])
        return cls(scores=np.asarray(scores), subject_ids=subject_ids, sample_ids=sample_ids)


# ---------------------------------------------------------------------------
# screening
# ---------------------------------------------------------------------------

@dataclass
class RejectionResult:
    mos: np.ndarray
    rejected: list[str]
    all_would_be_rejected: bool


def screen_subject_rejection(
    matrix: SubjectMatrix,
    outlier_ratio: float = 0.05,
    asymmetry: float | None = None,
) -> RejectionResult:
    """Outlier-count subject rejection in the BT.500 style, simplified.

    Per sample, the spread test uses 2 sigma when the score distribution is
    roughly Gaussian (kurtosis in [2, 4]) and sqrt(20) sigma otherwise; a
    subject is rejected when their outlier fraction exceeds ``outlier_ratio``.
    Passing ``asymmetry`` additionally requires |P-Q|/(P+Q) below it (the
    full standard's two-sidedness condition, which spares consistently
    one-sided voters). When everyone would go, nobody goes and the result is
    flagged.
    """
    matrix.require_screenable()
    x = matrix.scores
    present = ~np.isnan(x)
    if not present.any(axis=0).all():
        raise ValueError("every sample needs at least one vote")
    mean = np.nanmean(x, axis=0)
    std = np.nanstd(x, axis=0, ddof=0)
    centered = np.where(present, x - mean[None, :], 0.0)
    counts = present.sum(axis=0).astype(float)
    m2 = (centered ** 2).sum(axis=0) / counts
    m4 = (centered ** 4).sum(axis=0) / counts
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0, m4 / np.maximum(m2, 1e-300) ** 2, 0.0)
    k = np.where((kurt >= 2.0) & (kurt <= 4.0), 2.0, np.sqrt(20.0))
    upper = mean + k * std
    lower = mean - k * std
    filled = np.where(present, x, mean[None, :])
    p_cnt = (present & (filled > upper[None, :])).sum(axis=1)
    q_cnt = (present & (filled < lower[None, :])).sum(axis=1)
    voted = present.sum(axis=1)
    total = p_cnt + q_cnt
    ratio = np.where(voted > 0, total / np.maximum(voted, 1), 0.0)
    reject_mask = ratio > outlier_ratio
    if asymmetry is not None:
        balance = np.where(total > 0, np.abs(p_cnt - q_cnt) / np.maximum(total, 1), 1.0)
        reject_mask &= balance < asymmetry
    all_rejected = bool(reject_mask.all())
    if all_rejected:
        reject_mask = np.zeros_like(reject_mask)
    keep = ~reject_mask
    kept_present = present[keep]
    kept_votes = kept_present.sum(axis=0)
    kept_sum = np.where(kept_present, x[keep], 0.0).sum(axis=0)
    # samples whose only voters were rejected fall back to the raw mean
    mos = np.where(kept_votes > 0, kept_sum / np.maximum(kept_votes, 1), mean)
    rejected = [matrix.subject_ids[s] for s in np.flatnonzero(reject_mask)]
    return RejectionResult(mos=mos, rejected=rejected, all_would_be_rejected=all_rejected)


@dataclass
class MleResult:
    psi: np.ndarray
    bias: np.ndarray
    inconsistency: np.ndarray
    converged: bool
    iterations: int


def screen_mle(
    matrix: SubjectMatrix,
    max_iters: int = 500,
    tol: float = 1e-10,
) -> MleResult:
    """Alternating MLE fit of score(s, i) = psi_i + b_s + v_s * eps.

    Coordinate updates: psi as the 1/v^2-weighted mean of bias-corrected
    votes, b as each subject's mean residual (renormalized to sum to zero for
    identifiability), v as each subject's residual RMS (floored to keep
    weights finite). Stops when the largest parameter change drops below
    ``tol``; otherwise returns the last iterate with converged=False.
    """
    matrix.require_screenable()
    x = matrix.scores
    present = ~np.isnan(x)
    if not present.any(axis=0).all():
        raise ValueError("every sample needs at least one vote")
    x0 = np.where(present, x, 0.0)
    psi = np.nanmean(x, axis=0)
    b = np.zeros(matrix.n_subjects)
    v = np.ones(matrix.n_subjects)
    v_floor = 1e-6
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w = present / (v[:, None] ** 2)
        psi_new = ((x0 - b[:, None]) * w).sum(axis=0) / w.sum(axis=0)
        resid = x0 - psi_new[None, :]
        votes = present.sum(axis=1)
        b_new = np.where(votes > 0, (resid * present).sum(axis=1) / np.maximum(votes, 1), 0.0)
        shift = b_new.mean()
        b_new -= shift
        psi_new += shift
        resid2 = (x0 - psi_new[None, :] - b_new[:, None]) ** 2
        v_new = np.sqrt(
            np.maximum((resid2 * present).sum(axis=1) / np.maximum(votes, 1), v_floor ** 2)
        )
        delta = max(
            np.abs(psi_new - psi).max(),
            np.abs(b_new - b).max(),
            np.abs(v_new - v).max(),
        )
        psi, b, v = psi_new, b_new, v_new
        if delta < tol:
            converged = True
            break
    return MleResult(psi=psi, bias=b, inconsistency=v, converged=converged, iterations=it)


@dataclass
class BiasRemovalResult:
    mos: np.ndarray
    subject_bias: np.ndarray


def screen_bias_removal(matrix: SubjectMatrix) -> BiasRemovalResult:
    """Remove each subject's constant offset from the per-sample raw means."""
    matrix.require_screenable()
    x = matrix.scores
    present = ~np.isnan(x)
    if not present.any(axis=0).all():
        raise ValueError("every sample needs at least one vote")
    raw_mean = np.nanmean(x, axis=0)
    delta = np.where(present, x - raw_mean[None, :], 0.0)
    votes = present.sum(axis=1)
    bias = np.where(votes > 0, delta.sum(axis=1) / np.maximum(votes, 1), 0.0)
    cleaned = np.where(present, x - bias[:, None], 0.0)
    mos = cleaned.sum(axis=0) / present.sum(axis=0)
    return BiasRemovalResult(mos=mos, subject_bias=bias)


# ---------------------------------------------------------------------------
# robust classification losses for the binned head
# ---------------------------------------------------------------------------

def _check_simplex(probs: np.ndarray, target_bin: int) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("probs must be a 1-D simplex vector")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-8):
        raise ValueError("probs must be nonnegative and sum to 1")
    if not 0 <= target_bin < p.size:
        raise ValueError(f"target bin {target_bin} out of range")
    return p


def gce_loss(probs, target_bin: int, q: float = 0.7) -> tuple[float, np.ndarray]:
    """Generalized cross entropy (1 - p_t^q) / q with its gradient w.r.t. probs."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    p = _check_simplex(probs, target_bin)
    p_t = p[target_bin]
    loss = (1.0 - p_t ** q) / q
    grad = np.zeros_like(p)
    grad[target_bin] = -(p_t ** (q - 1.0))
    return float(loss), grad


def sce_loss(
    probs,
    target_bin: int,
    w_ce: float = 0.1,
    w_rce: float = 1.0,
    clip: float = -4.0,
) -> tuple[float, np.ndarray]:
    """Symmetric cross entropy: w_ce * CE + w_rce * reverse CE.

    ``clip`` substitutes log(0) for the off-target one-hot coordinates of
    the reverse term and must be negative.
    """
    if w_ce < 0 or w_rce < 0:
        raise ValueError("loss weights must be >= 0")
    if clip >= 0:
        raise ValueError(f"clip is the log-of-zero stand-in and must be < 0, got {clip}")
    p = _check_simplex(probs, target_bin)
    p_t = p[target_bin]
    with np.errstate(divide="ignore"):
        ce = -np.log(p_t)
    # definitional reverse CE: -sum_k p_k log(onehot_k), log 0 -> clip
    rce = -clip * (p.sum() - p_t)
    grad = np.full_like(p, -w_rce * clip)
    grad[target_bin] = -w_ce / p_t if p_t > 0 else -np.inf
    return float(w_ce * ce + w_rce * rce), grad


def nearest_bin(y: np.ndarray, k: int) -> np.ndarray:
    """Index of the bin center (j + 0.5) / k closest to each label in [0, 1]."""
    y = np.asarray(y, dtype=np.float64)
    return np.clip(np.floor(y * k).astype(np.int64), 0, k - 1)
