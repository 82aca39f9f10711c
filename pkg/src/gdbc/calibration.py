"""Gated dual-bias calibration: latent-bias posterior, gated update, targets.

Each training sample carries a running estimate mu_z of its label's latent
bias. Under the Gaussian observation model (noisy label | bias ~ Normal
centered on prediction + bias, bias ~ Normal prior), the posterior over the
bias is Gaussian; maximizing the EM surrogate in mu_z lands exactly on the
posterior mean, which has the exponential-smoothing form

    mu_z  <-  alpha * mu_z + (1 - alpha) * r,      r = y_noisy - f(x),

with alpha = sy2 / (sy2 + sz2). The update only fires when the l1 norm of
the last t_h + 1 fitting residuals exceeds the gate threshold, which keeps
a near-converged model from chasing its own noise. Training then regresses
on the calibrated target y_noisy - mu_z.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

THRESHOLD_MODES = ("printed", "prose")


@dataclass(frozen=True)
class GdbcConfig:
    """Hyperparameters of the gated bias update.

    threshold_mode selects the gate threshold: "printed" compares the
    residual-window l1 norm against t_h * epsilon, "prose" against epsilon
    alone.
    """

    alpha: float = 0.9
    epsilon: float = 0.01
    t_h: int = 1
    enabled: bool = True
    threshold_mode: str = "printed"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.t_h < 1:
            raise ValueError(f"t_h must be >= 1, got {self.t_h}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(
                f"threshold_mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}"
            )

    @property
    def gate_threshold(self) -> float:
        if self.threshold_mode == "printed":
            return self.t_h * self.epsilon
        return self.epsilon

    @property
    def window(self) -> int:
        """Number of residuals inspected by the gate (t_h + 1)."""
        return self.t_h + 1


@dataclass(frozen=True)
class EmParams:
    """Variances of the Gaussian observation/prior pair behind the EM derivation.

    Training never estimates these (alpha is set directly); they exist so the
    posterior algebra can be oracle-tested against quadrature.
    """

    sigma_y_sq: float
    sigma_z_sq: float
    mu_z_prior: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma_y_sq) and self.sigma_y_sq > 0.0):
            raise ValueError(f"sigma_y_sq must be positive, got {self.sigma_y_sq}")
        if not (np.isfinite(self.sigma_z_sq) and self.sigma_z_sq > 0.0):
            raise ValueError(f"sigma_z_sq must be positive, got {self.sigma_z_sq}")

    @property
    def alpha(self) -> float:
        """Smoothing weight implied by the variances: sy2 / (sy2 + sz2)."""
        return self.sigma_y_sq / (self.sigma_y_sq + self.sigma_z_sq)


def posterior_mean(params: EmParams, f_x: float, y_eta: float) -> float:
    """Mean of the bias posterior given prediction f_x and observed label y_eta."""
    sy2, sz2 = params.sigma_y_sq, params.sigma_z_sq
    return (sy2 * params.mu_z_prior - sz2 * (f_x - y_eta)) / (sy2 + sz2)


def posterior_variance(params: EmParams) -> float:
    """Variance of the bias posterior (conjugate-Gaussian harmonic form)."""
    sy2, sz2 = params.sigma_y_sq, params.sigma_z_sq
    return sy2 * sz2 / (sy2 + sz2)


def q_objective(
    params: EmParams,
    mu_z_candidate: float,
    f_x: float,
    y_eta: float,
    post_mean: float,
    post_var: float,
) -> float:
    """Single-sample EM surrogate (expected complete-data log-likelihood).

    Quadratic and concave in mu_z_candidate, with its maximum at the bias
    posterior mean; includes the additive constants so values are comparable
    across variance settings.
    """
    sy2, sz2 = params.sigma_y_sq, params.sigma_z_sq
    prior_term = (post_var + (mu_z_candidate - post_mean) ** 2) / sz2
    obs_term = (post_var + (y_eta - f_x - post_mean) ** 2) / sy2
    return -0.5 * (
        prior_term + obs_term + np.log(2.0 * np.pi * sz2) + np.log(2.0 * np.pi * sy2)
    )


@dataclass(frozen=True)
class BiasState:
    """Per-sample bias estimate plus the residual window inspected by the gate.

    ``history`` holds the most recent t_h + 1 fitting residuals, oldest
    first, primed with zeros so the gate can fire on the very first visit.
    """

    mu_z: float = 0.0
    history: tuple[float, ...] = (0.0, 0.0)
    updates_applied: int = 0

    @classmethod
    def fresh(cls, t_h: int) -> "BiasState":
        return cls(mu_z=0.0, history=(0.0,) * (t_h + 1), updates_applied=0)


def gated_update(state: BiasState, cfg: GdbcConfig, residual: float) -> BiasState:
    """Advance one visit with fitting residual = label minus prediction.

    The residual always enters the window; mu_z moves only when calibration
    is enabled and the window's l1 norm exceeds the gate threshold.
    """
    if len(state.history) != cfg.window:
        raise ValueError(
            f"history length {len(state.history)} does not match window {cfg.window}"
        )
    history = state.history[1:] + (residual,)
    norm1 = sum(abs(c) for c in history)
    if cfg.enabled and norm1 > cfg.gate_threshold:
        return BiasState(
            mu_z=cfg.alpha * state.mu_z + (1.0 - cfg.alpha) * residual,
            history=history,
            updates_applied=state.updates_applied + 1,
        )
    return replace(state, history=history)


def calibrated_target(state: BiasState, y_eta: float) -> float:
    """Training target after bias removal: y_eta - mu_z, deliberately unclamped."""
    return y_eta - state.mu_z


@dataclass
class BiasTable:
    """Array-of-struct view of one BiasState per training sample.

    This is what the training kernels mutate; ``state_of`` materializes a
    single sample's BiasState for inspection and cross-checking against the
    scalar ``gated_update``.
    """

    mu_z: np.ndarray
    history: np.ndarray
    updates_applied: np.ndarray

    @classmethod
    def fresh(cls, n: int, t_h: int) -> "BiasTable":
        return cls(
            mu_z=np.zeros(n, dtype=np.float64),
            history=np.zeros((n, t_h + 1), dtype=np.float64),
            updates_applied=np.zeros(n, dtype=np.int64),
        )

    @property
    def n(self) -> int:
        return self.mu_z.shape[0]

    def state_of(self, i: int) -> BiasState:
        return BiasState(
            mu_z=float(self.mu_z[i]),
            history=tuple(float(c) for c in self.history[i]),
            updates_applied=int(self.updates_applied[i]),
        )

    def copy(self) -> "BiasTable":
        return BiasTable(self.mu_z.copy(), self.history.copy(), self.updates_applied.copy())


def _gate_batch(
    mu_z: np.ndarray,
    hist: np.ndarray,
    updates: np.ndarray,
    indices: np.ndarray,
    residuals: np.ndarray,
    enabled: bool,
    alpha: float,
    threshold: float,
) -> None:
    """Raw-array core of the vectorized gated update (shared with kernels)."""
    window = hist[indices]
    window[:, :-1] = window[:, 1:]
    window[:, -1] = residuals
    hist[indices] = window
    if enabled:
        open_gate = np.abs(window).sum(axis=1) > threshold
        upd = indices[open_gate]
        mu_z[upd] = alpha * mu_z[upd] + (1.0 - alpha) * residuals[open_gate]
        updates[upd] += 1


def update_batch(
    table: BiasTable,
    indices: np.ndarray,
    residuals: np.ndarray,
    cfg: GdbcConfig,
) -> np.ndarray:
    """Vectorized gated_update over one batch; returns the batch's new mu_z.

    Mutates the table in place. Semantically identical to applying the scalar
    gated_update sample by sample.
    """
    _gate_batch(
        table.mu_z, table.history, table.updates_applied,
        indices, residuals, cfg.enabled, cfg.alpha, cfg.gate_threshold,
    )
    return table.mu_z[indices]
