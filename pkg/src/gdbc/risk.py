"""Monte-Carlo checks of the noisy-risk expansion and the misleading effect.

Under squared error and per-sample Gaussian bias z ~ N(mu, sigma^2) applied
with probability eta, the population risk against noisy labels expands into
the clean risk plus an eta-weighted bias term. The printed form of that
expansion and its line-by-line derivation disagree by one sign on the
quadratic term, so the verifier evaluates both conventions against Monte
Carlo and records which one closes. A constant-predictor construction
demonstrates the misleading effect: the clean-risk optimum loses under the
noisy risk whenever the mean bias is nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import predictor as P


@dataclass
class RiskProbe:
    """Population (features, clean labels, per-sample bias law) plus two predictors."""

    features: np.ndarray
    y_star: np.ndarray
    mu_z: np.ndarray
    sigma_z: np.ndarray
    eta: float
    arch: P.Architecture | None = None
    theta_a: np.ndarray | None = None
    theta_b: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.y_star = np.asarray(self.y_star, dtype=np.float64)
        self.mu_z = np.broadcast_to(
            np.asarray(self.mu_z, dtype=np.float64), self.y_star.shape
        ).copy()
        self.sigma_z = np.broadcast_to(
            np.asarray(self.sigma_z, dtype=np.float64), self.y_star.shape
        ).copy()
        if self.y_star.size == 0:
            raise ValueError("population must be nonempty")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


def empirical_risk(
    arch: P.Architecture,
    params: np.ndarray,
    probe: RiskProbe,
    label_mode: str = "clean",
    seed: int | None = None,
) -> float:
    """Mean squared error of the predictor over the population.

    ``label_mode="clean"`` scores against y_star; ``"noisy"`` draws one
    noisy-label realization (bias applied per sample with probability eta,
    seeded).
    """
    preds = P.predict(arch, params, probe.features)
    if label_mode == "clean":
        labels = probe.y_star
    elif label_mode == "noisy":
        if seed is None:
            raise ValueError("noisy label mode needs a seed")
        rng = np.random.default_rng(seed)
        z = probe.mu_z + probe.sigma_z * rng.standard_normal(probe.y_star.shape)
        noisy = rng.random(probe.y_star.shape) < probe.eta
        labels = probe.y_star + np.where(noisy, z, 0.0)
    else:
        raise ValueError(f"unknown label mode {label_mode!r}")
    return float(np.mean((preds - labels) ** 2))


def closed_form_noisy_risk(
    arch: P.Architecture, params: np.ndarray, probe: RiskProbe
) -> dict[str, float]:
    """Clean risk and both sign conventions of the expanded noisy risk."""
    preds = P.predict(arch, params, probe.features)
    clean = float(np.mean((preds - probe.y_star) ** 2))
    cross = 2.0 * probe.mu_z * (preds - probe.y_star)
    quad = probe.mu_z ** 2 + probe.sigma_z ** 2
    plus_form = clean + probe.eta * float(np.mean(quad - cross))
    printed_form = clean - probe.eta * float(np.mean(cross + quad))
    return {"clean": clean, "plus": plus_form, "printed": printed_form}


@dataclass
class ExpansionReport:
    """Monte-Carlo estimate of the noisy risk against both closed forms."""

    n_mc: int
    mc_risk: float
    mc_se: float
    clean_risk: float
    closed_plus: float
    closed_printed: float
    gap_plus: float
    gap_printed: float
    closing_sign: str
    gap_by_scale: list[tuple[int, float]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"monte-carlo noisy risk      {self.mc_risk:.8f}  (se {self.mc_se:.2e}, n_mc {self.n_mc})",
            f"clean risk                  {self.clean_risk:.8f}",
            f"closed form, '+' quadratic  {self.closed_plus:.8f}  gap {self.gap_plus:+.3e}",
            f"closed form, '-' quadratic  {self.closed_printed:.8f}  gap {self.gap_printed:+.3e}",
            f"identity closes with the '{self.closing_sign}' convention",
            "gap vs draws (expected ~1/sqrt(n)):",
        ]
        for n, gap in self.gap_by_scale:
            lines.append(f"  n={n:>9d}  gap={gap:+.3e}")
        return "\n".join(lines)


def verify_risk_expansion(
    probe: RiskProbe,
    n_mc: int,
    seed: int = 0,
    shard: int = 200,
) -> ExpansionReport:
    """Estimate the noisy risk by Monte Carlo and compare both closed forms.

    Draws are sharded; per-draw risks feed the standard error and the
    gap-vs-scale ladder.
    """
    if probe.arch is None or probe.theta_a is None:
        raise ValueError("probe needs arch and theta_a for the expansion check")
    if n_mc < 4:
        raise ValueError("n_mc too small")
    arch, params = probe.arch, probe.theta_a
    preds = P.predict(arch, params, probe.features)
    n = probe.y_star.size
    rng = np.random.default_rng(seed)
    draws = np.empty(n_mc)
    done = 0
    while done < n_mc:
        take = min(shard, n_mc - done)
        z = probe.mu_z[:, None] + probe.sigma_z[:, None] * rng.standard_normal((n, take))
        noisy = rng.random((n, take)) < probe.eta
        labels = probe.y_star[:, None] + np.where(noisy, z, 0.0)
        draws[done:done + take] = np.mean((preds[:, None] - labels) ** 2, axis=0)
        done += take
    closed = closed_form_noisy_risk(arch, params, probe)
    mc_risk = float(draws.mean())
    mc_se = float(draws.std(ddof=1) / np.sqrt(n_mc))
    gap_plus = mc_risk - closed["plus"]
    gap_printed = mc_risk - closed["printed"]
    ladder = []
    for scale in (max(4, n_mc // 100), max(4, n_mc // 10), n_mc):
        ladder.append((scale, float(draws[:scale].mean()) - closed["plus"]))
    return ExpansionReport(
        n_mc=n_mc,
        mc_risk=mc_risk,
        mc_se=mc_se,
        clean_risk=closed["clean"],
        closed_plus=closed["plus"],
        closed_printed=closed["printed"],
        gap_plus=gap_plus,
        gap_printed=gap_printed,
        closing_sign="plus" if abs(gap_plus) <= abs(gap_printed) else "printed",
        gap_by_scale=ladder,
    )


@dataclass
class WitnessReport:
    """Constant-predictor demonstration that the clean optimum can lose."""

    clean_optimum: float
    noisy_optimum: float
    risk_clean_opt_noisy: float
    risk_noisy_opt_noisy: float
    d_value: float
    witness_found: bool
    eta: float

    def to_text(self) -> str:
        lines = [
            f"constant family, eta={self.eta}",
            f"clean-risk minimizer  c* = {self.clean_optimum:.9f}",
            f"noisy-risk minimizer  c  = {self.noisy_optimum:.9f}",
            f"noisy risk at c*      {self.risk_clean_opt_noisy:.9f}",
            f"noisy risk at c       {self.risk_noisy_opt_noisy:.9f}",
            f"D = R_eta(c*) - R_eta(c) = {self.d_value:+.9f}",
        ]
        lines.append(
            "witness found: clean optimum loses under the noisy risk"
            if self.witness_found
            else "no witness found (mean bias is zero; clean optimum stays optimal)"
        )
        return "\n".join(lines)


def constant_noisy_risk(c: float, probe: RiskProbe) -> float:
    """Exact noisy risk of the constant predictor f(x) = c."""
    eta = probe.eta
    r_clean = (c - probe.y_star) ** 2
    r_bias = (c - probe.y_star - probe.mu_z) ** 2 + probe.sigma_z ** 2
    return float(np.mean((1.0 - eta) * r_clean + eta * r_bias))


def risk_difference_sign_demo(probe: RiskProbe) -> WitnessReport:
    """Minimize both risks over the constant family and report their gap.

    Both quadratics have exact vertices: the clean optimum is the mean clean
    label, the noisy optimum shifts by eta times the mean bias.
    """
    c_clean = float(np.mean(probe.y_star))
    c_noisy = float(np.mean(probe.y_star) + probe.eta * np.mean(probe.mu_z))
    r_a = constant_noisy_risk(c_clean, probe)
    r_b = constant_noisy_risk(c_noisy, probe)
    d = r_a - r_b
    return WitnessReport(
        clean_optimum=c_clean,
        noisy_optimum=c_noisy,
        risk_clean_opt_noisy=r_a,
        risk_noisy_opt_noisy=r_b,
        d_value=d,
        witness_found=d > 1e-15,
        eta=probe.eta,
    )


def constant_predictor(d: int, value: float) -> tuple[P.Architecture, np.ndarray]:
    """A linear predictor pinned to a constant output."""
    arch = P.Architecture(sizes=(d, 1), head=P.HEAD_SCALAR)
    params = np.zeros(arch.n_params)
    params[-1] = value
    return arch, params
