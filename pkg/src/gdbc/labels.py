"""Label simulation: abundant/low-cost opinion scores and bias-rate mixing.

Three sampling settings produce a low-cost label from an annotation pool,
matching how rating data is published: raw per-subject scores (subsample M
of them), a mean/stddev pair (draw M from the implied normal, clipped to
the score range), or an empirical score histogram (draw M categorically).
The abundant label is always the pool's full mean. Labels live in [0, 1]
after an affine normalization whose bounds come from configuration, never
from the data.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

RAW_SCORES = "raw_scores"
MOS_PLUS_STD = "mos_plus_std"
EMPIRICAL = "empirical_distribution"

_KIND_TO_CSV = {RAW_SCORES: "raw", MOS_PLUS_STD: "gauss", EMPIRICAL: "hist"}
_CSV_TO_KIND = {v: k for k, v in _KIND_TO_CSV.items()}


@dataclass(frozen=True)
class AnnotationPool:
    """Raw opinion-score information for one sample, in one of three shapes."""

    sample_id: str
    source_kind: str
    ratings: tuple[float, ...] = ()
    mos: float | None = None
    std: float | None = None
    histogram: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        if self.source_kind == RAW_SCORES:
            if not self.ratings:
                raise ValueError(f"{self.sample_id}: raw pool needs at least one rating")
        elif self.source_kind == MOS_PLUS_STD:
            if self.mos is None or self.std is None:
                raise ValueError(f"{self.sample_id}: gaussian pool needs mos and std")
            if self.std < 0:
                raise ValueError(f"{self.sample_id}: std must be >= 0, got {self.std}")
        elif self.source_kind == EMPIRICAL:
            if not self.histogram:
                raise ValueError(f"{self.sample_id}: empirical pool needs a histogram")
            if any(c < 0 for _, c in self.histogram):
                raise ValueError(f"{self.sample_id}: histogram counts must be >= 0")
            if all(c == 0 for _, c in self.histogram):
                raise ValueError(f"{self.sample_id}: histogram counts are all zero")
        else:
            raise ValueError(f"unknown source kind {self.source_kind!r}")


@dataclass(frozen=True)
class LabelSet:
    """Abundant label, low-cost label, mixed training label, and their gap.

    Freshly sampled labels start on the noisy branch (y_eta = y_lc);
    mix_bias_rate rewrites the branch per sample.
    """

    y_star: float
    y_lc: float
    y_eta: float
    z: float
    is_noisy: bool

    def __post_init__(self):
        if self.z != self.y_lc - self.y_star:
            raise ValueError("z must equal y_lc - y_star exactly")
        expected = self.y_lc if self.is_noisy else self.y_star
        if self.y_eta != expected:
            raise ValueError("y_eta must match the branch selected by is_noisy")


@dataclass(frozen=True)
class SimConfig:
    """Annotation count, bias rate, seed, and the score-range normalization."""

    m: int
    eta: float
    seed: int
    normalization: tuple[float, float]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"annotation number m must be >= 1, got {self.m}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"bias rate eta must lie in [0, 1], got {self.eta}")
        lo, hi = self.normalization
        if not lo < hi:
            raise ValueError(f"degenerate normalization range ({lo}, {hi})")


def _normalize(value: float, cfg: SimConfig) -> float:
    lo, hi = cfg.normalization
    return (value - lo) / (hi - lo)


def _pool_rng(cfg: SimConfig, sample_id: str, salt: str) -> np.random.Generator:
    # stable per-(seed, sample, purpose) stream so pools are order-independent
    digest = hashlib.sha256(f"{salt}|{sample_id}".encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, *words]))


def _label_set(y_star: float, y_lc: float) -> LabelSet:
    return LabelSet(y_star=y_star, y_lc=y_lc, y_eta=y_lc, z=y_lc - y_star, is_noisy=True)


def sample_lc_mos_raw(pool: AnnotationPool, cfg: SimConfig) -> LabelSet:
    """Subsample M raw scores without replacement; abundant label uses all of them."""
    if pool.source_kind != RAW_SCORES:
        raise ValueError(f"{pool.sample_id}: expected a raw-scores pool")
    ratings = np.asarray(pool.ratings, dtype=np.float64)
    if ratings.size < cfg.m:
        raise ValueError(
            f"{pool.sample_id}: insufficient annotations ({ratings.size} < M={cfg.m})"
        )
    rng = _pool_rng(cfg, pool.sample_id, "raw")
    picked = rng.choice(ratings.size, size=cfg.m, replace=False)
    y_lc = _normalize(float(ratings[picked].mean()), cfg)
    y_star = _normalize(float(ratings.mean()), cfg)
    return _label_set(y_star, y_lc)


def sample_lc_mos_gaussian(pool: AnnotationPool, cfg: SimConfig) -> LabelSet:
    """Draw M scores from Normal(mos, std^2) clipped to the score range."""
    if pool.source_kind != MOS_PLUS_STD:
        raise ValueError(f"{pool.sample_id}: expected a mos-plus-std pool")
    lo, hi = cfg.normalization
    if not lo <= pool.mos <= hi:
        raise ValueError(f"{pool.sample_id}: mos {pool.mos} outside score range")
    rng = _pool_rng(cfg, pool.sample_id, "gauss")
    draws = pool.mos + pool.std * rng.standard_normal(cfg.m)
    np.clip(draws, lo, hi, out=draws)
    y_lc = _normalize(float(draws.mean()), cfg)
    y_star = _normalize(pool.mos, cfg)
    return _label_set(y_star, y_lc)


def sample_lc_mos_empirical(pool: AnnotationPool, cfg: SimConfig) -> LabelSet:
    """Draw M scores from the histogram's categorical distribution."""
    if pool.source_kind != EMPIRICAL:
        raise ValueError(f"{pool.sample_id}: expected an empirical-distribution pool")
    values = np.asarray([v for v, _ in pool.histogram], dtype=np.float64)
    counts = np.asarray([c for _, c in pool.histogram], dtype=np.float64)
    probs = counts / counts.sum()
    rng = _pool_rng(cfg, pool.sample_id, "hist")
    picked = rng.choice(values.size, size=cfg.m, p=probs)
    y_lc = _normalize(float(values[picked].mean()), cfg)
    y_star = _normalize(float(values @ probs), cfg)
    return _label_set(y_star, y_lc)


_SAMPLERS = {
    RAW_SCORES: sample_lc_mos_raw,
    MOS_PLUS_STD: sample_lc_mos_gaussian,
    EMPIRICAL: sample_lc_mos_empirical,
}


def sample_labels(pool: AnnotationPool, cfg: SimConfig) -> LabelSet:
    """Dispatch to the sampler matching the pool's source kind."""
    return _SAMPLERS[pool.source_kind](pool, cfg)


def simulate_labels(pools: list[AnnotationPool], cfg: SimConfig) -> list[LabelSet]:
    """Sample every pool, then apply the bias-rate mix."""
    return mix_bias_rate([sample_labels(p, cfg) for p in pools], cfg)


def mix_bias_rate(labels: list[LabelSet], cfg: SimConfig) -> list[LabelSet]:
    """Per sample, keep the low-cost label with probability eta, else the abundant one.

    One Bernoulli draw per list position, fixed for the experiment; never
    alters y_lc or y_star.
    """
    rng = _pool_rng(cfg, "", "mix")
    u = rng.random(len(labels))
    mixed = []
    for label, noisy in zip(labels, u < cfg.eta):
        noisy = bool(noisy)
        mixed.append(
            replace(
                label,
                y_eta=label.y_lc if noisy else label.y_star,
                is_noisy=noisy,
            )
        )
    return mixed


def count_noisy(labels: list[LabelSet]) -> int:
    return sum(1 for l in labels if l.is_noisy)


# ---------------------------------------------------------------------------
# ratings CSV schema: "#range,min,max" header comment, rows "id,kind,payload..."
# ---------------------------------------------------------------------------

class RatingsCsvError(ValueError):
    pass


@dataclass(frozen=True)
class RatingsFile:
    pools: tuple[AnnotationPool, ...]
    score_range: tuple[float, float]


def load_ratings_file(path: str | Path) -> RatingsFile:
    """Parse a ratings CSV into pools plus the declared score range."""
    path = Path(path)
    pools: list[AnnotationPool] = []
    score_range = (0.0, 1.0)
    saw_range = False
    kind_seen: str | None = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].startswith("#"):
                if row[0].strip() == "#range":
                    if len(row) != 3:
                        raise RatingsCsvError(f"{path}:{lineno}: bad #range line")
                    score_range = (float(row[1]), float(row[2]))
                    saw_range = True
                continue
            try:
                pool = _parse_row(row)
            except (ValueError, IndexError) as exc:
                raise RatingsCsvError(f"{path}:{lineno}: malformed row: {exc}") from exc
            if kind_seen is None:
                kind_seen = pool.source_kind
            elif pool.source_kind != kind_seen:
                raise RatingsCsvError(
                    f"{path}:{lineno}: mixed schemas ({pool.source_kind} after {kind_seen})"
                )
            pools.append(pool)
    if pools and not saw_range:
        raise RatingsCsvError(f"{path}: missing '#range,min,max' header line")
    return RatingsFile(pools=tuple(pools), score_range=score_range)


def load_ratings_csv(path: str | Path) -> list[AnnotationPool]:
    """One AnnotationPool per data row; empty file yields an empty list."""
    return list(load_ratings_file(path).pools)


def _parse_row(row: list[str]) -> AnnotationPool:
    sample_id = row[0].strip()
    kind_token = row[1].strip()
    if kind_token not in _CSV_TO_KIND:
        raise ValueError(f"unknown kind {kind_token!r}")
    kind = _CSV_TO_KIND[kind_token]
    if kind == RAW_SCORES:
        if len(row) != 3:
            raise ValueError("raw rows are 'id,raw,score;score;...'")
        ratings = tuple(float(tok) for tok in row[2].split(";") if tok.strip())
        return AnnotationPool(sample_id=sample_id, source_kind=kind, ratings=ratings)
    if kind == MOS_PLUS_STD:
        if len(row) != 4:
            raise ValueError("gauss rows are 'id,gauss,mos,std'")
        return AnnotationPool(
            sample_id=sample_id, source_kind=kind,
            mos=float(row[2]), std=float(row[3]),
        )
    if len(row) != 3:
        raise ValueError("hist rows are 'id,hist,value:count;value:count;...'")
    pairs = []
    for tok in row[2].split(";"):
        if not tok.strip():
            continue
        value, count = tok.split(":")
        pairs.append((float(value), int(count)))
    return AnnotationPool(sample_id=sample_id, source_kind=kind, histogram=tuple(pairs))


def save_ratings_csv(
    path: str | Path,
    pools: list[AnnotationPool],
    score_range: tuple[float, float],
) -> None:
    """Write pools in the schema load_ratings_csv reads back."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["#range", repr(score_range[0]), repr(score_range[1])])
        for pool in pools:
            kind_token = _KIND_TO_CSV[pool.source_kind]
            if pool.source_kind == RAW_SCORES:
                payload = [";".join(repr(r) for r in pool.ratings)]
            elif pool.source_kind == MOS_PLUS_STD:
                payload = [repr(pool.mos), repr(pool.std)]
            else:
                payload = [";".join(f"{v!r}:{c}" for v, c in pool.histogram)]
            writer.writerow([pool.sample_id, kind_token, *payload])
