"""Label samplers against closed-form and Monte-Carlo oracles; CSV round trips."""

import numpy as np
import pytest

from gdbc.labels import (
    EMPIRICAL,
    MOS_PLUS_STD,
    RAW_SCORES,
    AnnotationPool,
    LabelSet,
    RatingsCsvError,
    SimConfig,
    count_noisy,
    load_ratings_csv,
    load_ratings_file,
    mix_bias_rate,
    sample_lc_mos_empirical,
    sample_lc_mos_gaussian,
    sample_lc_mos_raw,
    save_ratings_csv,
    simulate_labels,
)

RANGE_0_10 = (0.0, 10.0)


def _cfg(m=1, eta=1.0, seed=0, rng=RANGE_0_10):
    return SimConfig(m=m, eta=eta, seed=seed, normalization=rng)


def _raw_pool(ratings, sid="p0"):
    return AnnotationPool(sample_id=sid, source_kind=RAW_SCORES, ratings=tuple(ratings))


# --- raw-score subsampling ---------------------------------------------------

def test_raw_full_pool_has_zero_bias():
    labels = sample_lc_mos_raw(_raw_pool([2, 4, 6, 8]), _cfg(m=4))
    assert labels.y_lc == labels.y_star == 0.5
    assert labels.z == 0.0


def test_raw_two_point_pool():
    pool = _raw_pool([0, 10])
    for seed in range(20):
        labels = sample_lc_mos_raw(pool, _cfg(m=1, seed=seed))
        assert labels.y_lc in (0.0, 1.0)
        assert labels.y_star == 0.5
        assert abs(labels.z) == 0.5


def test_raw_insufficient_annotations():
    with pytest.raises(ValueError, match="insufficient annotations"):
        sample_lc_mos_raw(_raw_pool([1, 2]), _cfg(m=3))


def test_degenerate_normalization_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        SimConfig(m=1, eta=1.0, seed=0, normalization=(5.0, 5.0))


def test_raw_single_draw_variance_matches_finite_population():
    """var(z) over seeds ~ var(ratings) * (1 - 1/S) / M at M=1, within 5%."""
    rng = np.random.default_rng(8)
    ratings = np.clip(np.round(rng.normal(6.0, 1.0, size=30)), 1, 10)
    pool = _raw_pool(ratings)
    zs = np.array(
        [sample_lc_mos_raw(pool, _cfg(m=1, seed=s)).z for s in range(10_000)]
    )
    normalized = ratings / 10.0
    expected = np.var(normalized, ddof=1) * (1.0 - 1.0 / 30.0)
    assert abs(np.var(zs) - expected) / expected < 0.05


def test_raw_determinism():
    pool = _raw_pool([1, 3, 5, 7, 9])
    cfg = _cfg(m=2, seed=99)
    assert sample_lc_mos_raw(pool, cfg) == sample_lc_mos_raw(pool, cfg)


# --- gaussian setting --------------------------------------------------------

def _gauss_pool(mos, std, sid="g0"):
    return AnnotationPool(sample_id=sid, source_kind=MOS_PLUS_STD, mos=mos, std=std)


def test_gaussian_zero_std_is_exact():
    for m in (1, 4, 8):
        labels = sample_lc_mos_gaussian(_gauss_pool(5.0, 0.0), _cfg(m=m))
        assert labels.y_lc == labels.y_star == 0.5


def test_gaussian_std_of_z_matches_sampling_distribution():
    """std(z) ~ (1/10) / sqrt(8) over 10k seeds, within 5% (truncation at 5 sigma)."""
    pool = _gauss_pool(5.0, 1.0)
    zs = np.array(
        [sample_lc_mos_gaussian(pool, _cfg(m=8, seed=s)).z for s in range(10_000)]
    )
    expected = 0.1 / np.sqrt(8.0)
    assert abs(zs.std() - expected) / expected < 0.05


def test_gaussian_truncation_keeps_labels_in_range():
    pool = _gauss_pool(9.8, 2.0)
    for seed in range(200):
        labels = sample_lc_mos_gaussian(pool, _cfg(m=1, seed=seed))
        assert 0.0 <= labels.y_lc <= 1.0


def test_negative_std_rejected():
    with pytest.raises(ValueError, match="std"):
        _gauss_pool(5.0, -1.0)


# --- empirical setting -------------------------------------------------------

def _hist_pool(pairs, sid="h0"):
    return AnnotationPool(sample_id=sid, source_kind=EMPIRICAL, histogram=tuple(pairs))


def test_empirical_point_mass():
    pool = _hist_pool([(5.0, 100)])
    for m in (1, 3, 8):
        labels = sample_lc_mos_empirical(pool, _cfg(m=m))
        assert labels.y_lc == labels.y_star == 0.5


def test_empirical_two_category_frequencies():
    pool = _hist_pool([(1.0, 1), (9.0, 1)])
    values = [sample_lc_mos_empirical(pool, _cfg(m=1, seed=s)).y_lc for s in range(4000)]
    values = np.array(values)
    assert set(np.unique(values)) == {0.1, 0.9}
    assert abs((values == 0.1).mean() - 0.5) < 0.03


def test_empirical_unbiasedness():
    """Mean of y_lc equals y_star within 3 standard errors over 10k seeds."""
    pool = _hist_pool([(2.0, 5), (4.0, 10), (6.0, 30), (8.0, 10), (10.0, 5)])
    labels = [sample_lc_mos_empirical(pool, _cfg(m=2, seed=s)) for s in range(10_000)]
    y_lc = np.array([l.y_lc for l in labels])
    y_star = labels[0].y_star
    se = y_lc.std(ddof=1) / np.sqrt(y_lc.size)
    assert abs(y_lc.mean() - y_star) < 3 * se


def test_all_zero_histogram_rejected():
    with pytest.raises(ValueError, match="zero"):
        _hist_pool([(1.0, 0), (2.0, 0)])


# --- bias-rate mixing --------------------------------------------------------

def _labelsets(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        y_star = float(rng.uniform(0.2, 0.8))
        y_lc = float(np.clip(y_star + rng.normal(0, 0.1), 0, 1))
        out.append(
            LabelSet(y_star=y_star, y_lc=y_lc, y_eta=y_lc, z=y_lc - y_star, is_noisy=True)
        )
    return out


def test_mix_eta_zero_all_clean():
    mixed = mix_bias_rate(_labelsets(50), _cfg(eta=0.0))
    assert all(l.y_eta == l.y_star and not l.is_noisy for l in mixed)


def test_mix_eta_one_all_noisy():
    mixed = mix_bias_rate(_labelsets(50), _cfg(eta=1.0))
    assert all(l.y_eta == l.y_lc and l.is_noisy for l in mixed)


def test_mix_binomial_count():
    """Noisy count lands in the central 99.9% binomial interval."""
    from math import sqrt

    n, eta = 10_000, 0.6
    mixed = mix_bias_rate(_labelsets(n), _cfg(eta=eta, seed=5))
    count = count_noisy(mixed)
    half_width = 3.29 * sqrt(n * eta * (1 - eta))
    assert abs(count - n * eta) < half_width


def test_mix_never_touches_component_labels():
    labels = _labelsets(30)
    mixed = mix_bias_rate(labels, _cfg(eta=0.5, seed=1))
    for before, after in zip(labels, mixed):
        assert after.y_lc == before.y_lc
        assert after.y_star == before.y_star
        assert after.z == before.z == after.y_lc - after.y_star


def test_simulate_labels_end_to_end_determinism():
    pools = [_raw_pool([1, 3, 5, 7, 9], sid=f"p{i}") for i in range(10)]
    cfg = _cfg(m=2, eta=0.5, seed=123)
    a = simulate_labels(pools, cfg)
    b = simulate_labels(pools, cfg)
    assert a == b


def test_bias_shrinks_with_annotation_number():
    """Mean z^2 over seeds is non-increasing in M for the raw setting."""
    rng = np.random.default_rng(31)
    ratings = np.clip(rng.normal(6.0, 1.5, size=30), 1, 10)
    pool = _raw_pool(ratings)
    mean_sq = []
    for m in (1, 2, 4, 8):
        zs = np.array([sample_lc_mos_raw(pool, _cfg(m=m, seed=s)).z for s in range(3000)])
        mean_sq.append(float(np.mean(zs ** 2)))
    assert all(a >= b for a, b in zip(mean_sq, mean_sq[1:]))


def test_normalization_preserves_ranks():
    rng = np.random.default_rng(4)
    ratings_sets = [np.sort(rng.uniform(0, 10, size=12)) for _ in range(8)]
    pools = [_raw_pool(r, sid=f"r{i}") for i, r in enumerate(ratings_sets)]
    raw_means = [float(np.mean(r)) for r in ratings_sets]
    stars = [sample_lc_mos_raw(p, _cfg(m=1, seed=0)).y_star for p in pools]
    assert np.array_equal(np.argsort(raw_means), np.argsort(stars))


# --- CSV schema --------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    pools = [
        _raw_pool([2.0, 4.0, 6.0], sid="img1"),
        _raw_pool([1.5, 9.5], sid="img2"),
    ]
    path = tmp_path / "ratings.csv"
    save_ratings_csv(path, pools, RANGE_0_10)
    loaded = load_ratings_file(path)
    assert loaded.score_range == RANGE_0_10
    assert list(loaded.pools) == pools


def test_csv_schema_echo(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("#range,0,10\nimg1,raw,2;4;6\n")
    pools = load_ratings_csv(path)
    assert pools[0].ratings == (2.0, 4.0, 6.0)

    path.write_text("#range,0,10\nimg2,gauss,5.0,1.2\n")
    pools = load_ratings_csv(path)
    assert pools[0].mos == 5.0 and pools[0].std == 1.2

    path.write_text("#range,0,10\nimg3,hist,1:3;2:5\n")
    pools = load_ratings_csv(path)
    assert pools[0].histogram == ((1.0, 3), (2.0, 5))


def test_csv_empty_file_is_empty_list(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert load_ratings_csv(path) == []


def test_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("#range,0,10\nimg1,raw,2;4\nimg2,raw,not_a_number\n")
    with pytest.raises(RatingsCsvError, match=":3"):
        load_ratings_csv(path)


def test_csv_mixed_schemas_rejected(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("#range,0,10\nimg1,raw,2;4\nimg2,gauss,5.0,1.0\n")
    with pytest.raises(RatingsCsvError, match="mixed schemas"):
        load_ratings_csv(path)
