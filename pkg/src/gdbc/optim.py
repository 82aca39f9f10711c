"""SGD and Adam with an optional cosine-annealed learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KIND_SGD = 0
KIND_ADAM = 1

SCHEDULE_CONSTANT = 0
SCHEDULE_COSINE = 1

_KINDS = {"sgd": KIND_SGD, "adam": KIND_ADAM}
_SCHEDULES = {"constant": SCHEDULE_CONSTANT, "cosine": SCHEDULE_COSINE}


@dataclass
class OptimizerState:
    """Mutable optimizer state for one flat parameter vector."""

    kind: int
    lr: float
    total_steps: int
    schedule: int = SCHEDULE_COSINE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def create(
        cls,
        kind: str,
        lr: float,
        n_params: int,
        total_steps: int,
        schedule: str = "cosine",
    ) -> "OptimizerState":
        if kind not in _KINDS:
            raise ValueError(f"optimizer kind must be one of {sorted(_KINDS)}, got {kind!r}")
        if schedule not in _SCHEDULES:
            raise ValueError(f"schedule must be one of {sorted(_SCHEDULES)}, got {schedule!r}")
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {total_steps}")
        return cls(
            kind=_KINDS[kind],
            lr=lr,
            total_steps=total_steps,
            schedule=_SCHEDULES[schedule],
            m=np.zeros(n_params, dtype=np.float64),
            v=np.zeros(n_params, dtype=np.float64),
        )

    def lr_at(self, step: int) -> float:
        """Learning rate applied at 0-based step index ``step``."""
        if self.schedule == SCHEDULE_CONSTANT:
            return self.lr
        return self.lr * 0.5 * (1.0 + np.cos(np.pi * step / self.total_steps))

    def apply(self, params: np.ndarray, grad: np.ndarray) -> None:
        """One in-place update of ``params``; advances the step counter."""
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite gradient passed to optimizer")
        lr_t = self.lr_at(self.step)
        if self.kind == KIND_SGD:
            params -= lr_t * grad
        else:
            # in-place so kernel-side views of m/v stay aliased
            self.m *= self.beta1
            self.m += (1.0 - self.beta1) * grad
            self.v *= self.beta2
            self.v += (1.0 - self.beta2) * grad * grad
            t = self.step + 1
            m_hat = self.m / (1.0 - self.beta1 ** t)
            v_hat = self.v / (1.0 - self.beta2 ** t)
            params -= lr_t * m_hat / (np.sqrt(v_hat) + self.eps)
        self.step += 1
