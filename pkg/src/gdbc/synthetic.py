"""Desk-scale synthetic population: features, latent quality, virtual annotators.

Ground truth is a smooth monotone map y* = sigmoid(w.x + b) over standard
normal features, so rank metrics stay meaningful. A fixed panel of virtual
annotators scores every sample; each annotator carries a constant personal
bias plus per-rating noise, and scores are clipped to the rating scale. The
abundant label is the panel mean, exactly as it would be computed from the
raw score matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import RAW_SCORES, AnnotationPool


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 2000
    d: int = 8
    subjects: int = 30
    subject_bias_std: float = 1.8
    rating_noise_std: float = 1.4
    score_range: tuple[float, float] = (0.0, 10.0)
    weight_scale: float = 1.5
    seed: int = 7

    def __post_init__(self):
        if self.n < 2 or self.d < 1 or self.subjects < 1:
            raise ValueError("population needs n >= 2, d >= 1, subjects >= 1")
        lo, hi = self.score_range
        if not lo < hi:
            raise ValueError(f"degenerate score range ({lo}, {hi})")
        if self.subject_bias_std < 0 or self.rating_noise_std < 0:
            raise ValueError("noise scales must be >= 0")


@dataclass
class SyntheticPopulation:
    """Features, latent quality in [0, 1], and the subjects-by-samples score matrix."""

    config: SyntheticConfig
    features: np.ndarray
    latent_quality: np.ndarray
    scores: np.ndarray
    subject_bias: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def la_mos_normalized(self) -> np.ndarray:
        """Panel-mean label per sample, mapped to [0, 1] by the score range."""
        lo, hi = self.config.score_range
        return (self.scores.mean(axis=0) - lo) / (hi - lo)

    def sample_ids(self) -> list[str]:
        return [f"s{i:05d}" for i in range(self.n)]

    def pools(self) -> list[AnnotationPool]:
        ids = self.sample_ids()
        return [
            AnnotationPool(
                sample_id=ids[i],
                source_kind=RAW_SCORES,
                ratings=tuple(float(v) for v in self.scores[:, i]),
            )
            for i in range(self.n)
        ]

    def subject_ids(self) -> list[str]:
        return [f"subj{s:03d}" for s in range(self.scores.shape[0])]


def generate_population(cfg: SyntheticConfig) -> SyntheticPopulation:
    """Deterministically generate a population from its config seed."""
    rng = np.random.default_rng(cfg.seed)
    direction = rng.standard_normal(cfg.d)
    w = cfg.weight_scale * direction / np.linalg.norm(direction)
    x = rng.standard_normal((cfg.n, cfg.d))
    latent = 1.0 / (1.0 + np.exp(-(x @ w)))
    lo, hi = cfg.score_range
    true_raw = lo + (hi - lo) * latent
    bias = cfg.subject_bias_std * rng.standard_normal(cfg.subjects)
    noise = cfg.rating_noise_std * rng.standard_normal((cfg.subjects, cfg.n))
    scores = np.clip(true_raw[None, :] + bias[:, None] + noise, lo, hi)
    return SyntheticPopulation(
        config=cfg,
        features=x,
        latent_quality=latent,
        scores=scores,
        subject_bias=bias,
    )


def subsample_scores(
    scores: np.ndarray,
    m: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Pick M annotators per sample without replacement, keeping identities.

    Returns (sparse matrix with NaN for unpicked entries, low-cost raw means).
    Used where screening baselines need to know who said what.
    """
    n_subjects, n_samples = scores.shape
    if m > n_subjects:
        raise ValueError(f"insufficient annotations ({n_subjects} < M={m})")
    rng = np.random.default_rng(seed)
    sparse = np.full_like(scores, np.nan)
    lc_raw = np.zeros(n_samples)
    for i in range(n_samples):
        picked = rng.choice(n_subjects, size=m, replace=False)
        sparse[picked, i] = scores[picked, i]
        lc_raw[i] = scores[picked, i].mean()
    return sparse, lc_raw
