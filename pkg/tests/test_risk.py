"""Monte-Carlo verification of the noisy-risk expansion and the witness demo."""

import numpy as np
import pytest

from gdbc.predictor import init_params, parse_architecture
from gdbc.risk import (
    RiskProbe,
    closed_form_noisy_risk,
    constant_noisy_risk,
    constant_predictor,
    empirical_risk,
    risk_difference_sign_demo,
    verify_risk_expansion,
)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def _random_probe(rng, n=400, d=4, eta=1.0, mu_scale=0.2, sigma_scale=0.1):
    x = rng.standard_normal((n, d))
    y_star = rng.uniform(0.1, 0.9, size=n)
    arch = parse_architecture("linear", d)
    return RiskProbe(
        features=x,
        y_star=y_star,
        mu_z=mu_scale * rng.standard_normal(n),
        sigma_z=sigma_scale * rng.uniform(0.5, 1.5, size=n),
        eta=eta,
        arch=arch,
        theta_a=init_params(arch, seed=int(rng.integers(1 << 30))),
        theta_b=init_params(arch, seed=int(rng.integers(1 << 30))),
    )


# --- empirical risk ----------------------------------------------------------

def test_perfect_predictor_zero_clean_risk(rng):
    d = 3
    x = rng.standard_normal((50, d))
    arch, params = constant_predictor(d, 0.5)
    probe = RiskProbe(x, np.full(50, 0.5), np.zeros(50), np.zeros(50), eta=1.0)
    assert empirical_risk(arch, params, probe, "clean") == 0.0


def test_empirical_risk_matches_direct_summation(rng):
    probe = _random_probe(rng, n=1000)
    preds = probe.features @ probe.theta_a[:-1] + probe.theta_a[-1]
    direct = sum((float(p) - float(y)) ** 2 for p, y in zip(preds, probe.y_star)) / 1000
    assert abs(empirical_risk(probe.arch, probe.theta_a, probe, "clean") - direct) < 1e-12


def test_noisy_risk_is_seeded(rng):
    probe = _random_probe(rng)
    a = empirical_risk(probe.arch, probe.theta_a, probe, "noisy", seed=7)
    b = empirical_risk(probe.arch, probe.theta_a, probe, "noisy", seed=7)
    c = empirical_risk(probe.arch, probe.theta_a, probe, "noisy", seed=8)
    assert a == b
    assert a != c


# --- expansion identity ------------------------------------------------------

def test_expansion_no_noise_degeneracy(rng):
    probe = _random_probe(rng, mu_scale=0.0, sigma_scale=0.0)
    closed = closed_form_noisy_risk(probe.arch, probe.theta_a, probe)
    assert np.isclose(closed["plus"], closed["clean"])
    report = verify_risk_expansion(probe, n_mc=200, seed=1)
    assert abs(report.mc_risk - report.clean_risk) < 1e-12


def test_expansion_eta_zero_is_clean_risk(rng):
    probe = _random_probe(rng, eta=0.0)
    report = verify_risk_expansion(probe, n_mc=200, seed=2)
    assert abs(report.mc_risk - report.clean_risk) < 1e-12
    assert abs(report.closed_plus - report.clean_risk) < 1e-15


def test_expansion_gap_within_three_standard_errors(rng):
    """Fixed-bias probe at eta=1: the '+' convention closes the identity."""
    n = 200
    x = rng.standard_normal((n, 3))
    arch, params = constant_predictor(3, 0.4)
    probe = RiskProbe(
        features=x,
        y_star=np.full(n, 0.5),
        mu_z=np.full(n, 0.1),
        sigma_z=np.full(n, 0.05),
        eta=1.0,
        arch=arch,
        theta_a=params,
    )
    report = verify_risk_expansion(probe, n_mc=100_000, seed=3)
    assert abs(report.gap_plus) < 3.0 * report.mc_se
    assert report.closing_sign == "plus"
    # the printed convention misses by about 2 eta E[mu^2 + sigma^2]
    assert abs(report.gap_printed) > 10.0 * report.mc_se


def test_expansion_holds_on_random_probes(rng):
    """Eq-expansion identity on 20 random probes, gap < 3 MC standard errors."""
    for k in range(20):
        probe = _random_probe(rng, n=150, eta=float(rng.uniform(0.2, 1.0)))
        report = verify_risk_expansion(probe, n_mc=20_000, seed=100 + k)
        assert abs(report.gap_plus) < 3.0 * report.mc_se


def test_expansion_gap_shrinks_with_draws(rng):
    probe = _random_probe(rng, n=100)
    report = verify_risk_expansion(probe, n_mc=50_000, seed=5)
    scales = [s for s, _ in report.gap_by_scale]
    gaps = [abs(g) for _, g in report.gap_by_scale]
    assert scales == sorted(scales)
    # not strictly monotone draw by draw, but the ladder should come down overall
    assert gaps[-1] < gaps[0] * 2.0
    assert report.to_text()


# --- misleading-effect witness ----------------------------------------------

def test_witness_zero_bias_has_no_witness(rng):
    n = 80
    probe = RiskProbe(
        features=rng.standard_normal((n, 2)),
        y_star=rng.uniform(0.2, 0.8, size=n),
        mu_z=np.zeros(n),
        sigma_z=np.full(n, 0.05),
        eta=1.0,
    )
    report = risk_difference_sign_demo(probe)
    assert not report.witness_found
    assert report.d_value <= 1e-15


def test_witness_constant_family_closed_form(rng):
    """y*=0.5, mu=0.3, eta=1: noisy optimum 0.8, clean optimum loses."""
    n = 64
    probe = RiskProbe(
        features=rng.standard_normal((n, 2)),
        y_star=np.full(n, 0.5),
        mu_z=np.full(n, 0.3),
        sigma_z=np.full(n, 0.02),
        eta=1.0,
    )
    report = risk_difference_sign_demo(probe)
    assert abs(report.noisy_optimum - 0.8) < 1e-9
    assert abs(report.clean_optimum - 0.5) < 1e-9
    assert report.witness_found
    assert np.isclose(report.d_value, 0.09)
    # exact quadratic vertex: perturbing the argmin only increases the risk
    for delta in (-0.01, 0.01):
        assert constant_noisy_risk(report.noisy_optimum + delta, probe) > report.risk_noisy_opt_noisy


def test_witness_d_monotone_in_eta(rng):
    n = 64
    base = dict(
        features=rng.standard_normal((n, 2)),
        y_star=np.full(n, 0.5),
        mu_z=np.full(n, 0.3),
        sigma_z=np.full(n, 0.02),
    )
    # fixed witness pair from the eta=1 construction
    c_clean, c_noisy = 0.5, 0.8
    prev = -np.inf
    for eta in (0.25, 0.5, 0.75, 1.0):
        probe = RiskProbe(eta=eta, **base)
        d = constant_noisy_risk(c_clean, probe) - constant_noisy_risk(c_noisy, probe)
        assert d > prev
        prev = d


def test_witness_matches_monte_carlo(rng):
    n = 100
    probe = RiskProbe(
        features=rng.standard_normal((n, 2)),
        y_star=np.full(n, 0.5),
        mu_z=np.full(n, 0.3),
        sigma_z=np.full(n, 0.05),
        eta=0.7,
    )
    report = risk_difference_sign_demo(probe)
    arch, params_a = constant_predictor(2, report.clean_optimum)
    _, params_b = constant_predictor(2, report.noisy_optimum)
    probe.arch = arch
    probe.theta_a = params_a
    mc_a = verify_risk_expansion(probe, n_mc=40_000, seed=11)
    probe.theta_a = params_b
    mc_b = verify_risk_expansion(probe, n_mc=40_000, seed=11)
    d_mc = mc_a.mc_risk - mc_b.mc_risk
    assert abs(d_mc - report.d_value) < 3.0 * (mc_a.mc_se + mc_b.mc_se)
