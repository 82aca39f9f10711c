"""Full training runs: epoch loop, calibration state, checkpoints, loss curves."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import predictor as P
from .calibration import BiasTable, GdbcConfig
from .kernels import get_kernels, regression_batch_step
from .optim import OptimizerState

KERNELS = get_kernels()


class TrainingDiverged(RuntimeError):
    """Raised when a batch loss or gradient stops being finite."""


@dataclass
class LossCurves:
    """Per-epoch training diagnostics for loss-curve CSV emission."""

    train_loss: list[float] = field(default_factory=list)
    mse_vs_labels: list[float] = field(default_factory=list)
    mse_vs_la: list[float] = field(default_factory=list)


@dataclass
class TrainerState:
    """Everything needed to resume a run bit-exactly."""

    arch: P.Architecture
    params: np.ndarray
    opt: OptimizerState
    bias: BiasTable
    epoch: int
    shuffle_rng: np.random.Generator


def make_trainer_state(
    arch: P.Architecture,
    gdbc_cfg: GdbcConfig,
    n_train: int,
    epochs: int,
    batch_size: int,
    opt_kind: str,
    lr: float,
    schedule: str,
    init_seed: int,
    shuffle_seed: int,
) -> TrainerState:
    params = P.init_params(arch, init_seed)
    n_batches = -(-n_train // batch_size)
    opt = OptimizerState.create(
        kind=opt_kind, lr=lr, n_params=arch.n_params,
        total_steps=epochs * n_batches, schedule=schedule,
    )
    return TrainerState(
        arch=arch,
        params=params,
        opt=opt,
        bias=BiasTable.fresh(n_train, gdbc_cfg.t_h),
        epoch=0,
        shuffle_rng=np.random.default_rng(shuffle_seed),
    )


def gdbc_train_step(
    state: TrainerState,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    batch_idx: np.ndarray,
    cfg: GdbcConfig,
) -> float:
    """One calibrated squared-error step on a batch; mutates the trainer state.

    Computes each sample's fitting residual, advances its gated bias state,
    regresses on the calibrated targets, and applies one optimizer step on
    the batch-mean loss. Returns that loss.
    """
    loss = regression_batch_step(
        state.arch, state.params, state.opt,
        np.asarray(x_batch, dtype=np.float64),
        np.asarray(y_batch, dtype=np.float64),
        np.asarray(batch_idx, dtype=np.int64),
        state.bias.mu_z, state.bias.history, state.bias.updates_applied,
        cfg.enabled, cfg.alpha, cfg.gate_threshold,
    )
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite batch loss {loss} at step {state.opt.step}")
    return loss


def train_run(
    state: TrainerState,
    x: np.ndarray,
    y_eta: np.ndarray,
    cfg: GdbcConfig,
    epochs: int,
    batch_size: int,
    y_lc: np.ndarray | None = None,
    y_star: np.ndarray | None = None,
    collect_curves: bool = False,
) -> LossCurves:
    """Run epochs ``state.epoch .. epochs`` with the active kernel backend.

    Each sample is visited exactly once per epoch in a freshly shuffled
    order, so its bias window advances once per epoch. Mutates ``state``;
    returns the collected curves (empty when not requested).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y_eta = np.ascontiguousarray(y_eta, dtype=np.float64)
    n = x.shape[0]
    if y_eta.shape != (n,):
        raise ValueError("y_eta must have one label per training row")
    if state.bias.n != n:
        raise ValueError("bias table size does not match the training set")
    n_batches = -(-n // batch_size)
    sizes = state.arch.sizes_array()
    off_w, off_b = state.arch.layer_offsets()
    centers = (
        state.arch.bin_centers()
        if state.arch.head == P.HEAD_SOFTMAX
        else np.zeros(1, dtype=np.float64)
    )
    run_epoch = KERNELS["run_epoch_regression"]
    curves = LossCurves()
    batch_losses = np.zeros(n_batches, dtype=np.float64)
    while state.epoch < epochs:
        perm = state.shuffle_rng.permutation(n).astype(np.int64)
        step, status = run_epoch(
            state.params, state.opt.m, state.opt.v,
            state.opt.kind, state.opt.lr, state.opt.total_steps,
            state.opt.beta1, state.opt.beta2, state.opt.eps,
            state.opt.schedule, state.opt.step,
            sizes, off_w, off_b, state.arch.head, centers,
            x, y_eta, perm, batch_size,
            state.bias.mu_z, state.bias.history, state.bias.updates_applied,
            cfg.enabled, cfg.alpha, cfg.gate_threshold,
            batch_losses,
        )
        state.opt.step = int(step)
        if status != -1:
            raise TrainingDiverged(
                f"non-finite loss in epoch {state.epoch}, batch {status}"
            )
        state.epoch += 1
        if collect_curves:
            preds = P.predict(state.arch, state.params, x)
            curves.train_loss.append(float(batch_losses.mean()))
            ref_lc = y_lc if y_lc is not None else y_eta
            curves.mse_vs_labels.append(float(np.mean((preds - ref_lc) ** 2)))
            if y_star is not None:
                curves.mse_vs_la.append(float(np.mean((preds - y_star) ** 2)))
    return curves


def train_run_categorical(
    state: TrainerState,
    x: np.ndarray,
    target_bins: np.ndarray,
    loss_kind: int,
    epochs: int,
    batch_size: int,
    q: float = 0.7,
    w_ce: float = 0.1,
    w_rce: float = 1.0,
    clip: float = -4.0,
) -> list[float]:
    """Robust-classification training (GCE/SCE) on a binned-head predictor."""
    if state.arch.head != P.HEAD_SOFTMAX:
        raise ValueError("categorical training requires a binned head")
    x = np.ascontiguousarray(x, dtype=np.float64)
    target_bins = np.ascontiguousarray(target_bins, dtype=np.int64)
    n = x.shape[0]
    n_batches = -(-n // batch_size)
    sizes = state.arch.sizes_array()
    off_w, off_b = state.arch.layer_offsets()
    centers = state.arch.bin_centers()
    run_epoch = KERNELS["run_epoch_categorical"]
    batch_losses = np.zeros(n_batches, dtype=np.float64)
    epoch_losses: list[float] = []
    while state.epoch < epochs:
        perm = state.shuffle_rng.permutation(n).astype(np.int64)
        step, status = run_epoch(
            state.params, state.opt.m, state.opt.v,
            state.opt.kind, state.opt.lr, state.opt.total_steps,
            state.opt.beta1, state.opt.beta2, state.opt.eps,
            state.opt.schedule, state.opt.step,
            sizes, off_w, off_b, state.arch.head, centers,
            x, target_bins, perm, batch_size,
            loss_kind, q, w_ce, w_rce, clip,
            batch_losses,
        )
        state.opt.step = int(step)
        if status != -1:
            raise TrainingDiverged(
                f"non-finite loss in epoch {state.epoch}, batch {status}"
            )
        state.epoch += 1
        epoch_losses.append(float(batch_losses.mean()))
    return epoch_losses


def save_checkpoint(state: TrainerState, path: str | Path) -> None:
    """Dump parameters, optimizer moments, bias states and RNG state to one file."""
    path = Path(path)
    rng_state = json.dumps(state.shuffle_rng.bit_generator.state)
    np.savez(
        path,
        sizes=state.arch.sizes_array(),
        head=np.int64(state.arch.head),
        params=state.params,
        opt_kind=np.int64(state.opt.kind),
        opt_lr=np.float64(state.opt.lr),
        opt_total_steps=np.int64(state.opt.total_steps),
        opt_schedule=np.int64(state.opt.schedule),
        opt_beta1=np.float64(state.opt.beta1),
        opt_beta2=np.float64(state.opt.beta2),
        opt_eps=np.float64(state.opt.eps),
        opt_step=np.int64(state.opt.step),
        opt_m=state.opt.m,
        opt_v=state.opt.v,
        mu_z=state.bias.mu_z,
        history=state.bias.history,
        updates_applied=state.bias.updates_applied,
        epoch=np.int64(state.epoch),
        rng_state=np.bytes_(rng_state.encode()),
    )


def load_checkpoint(path: str | Path) -> TrainerState:
    """Restore a TrainerState saved by save_checkpoint, bit-exactly."""
    with np.load(Path(path), allow_pickle=False) as data:
        arch = P.Architecture(
            sizes=tuple(int(s) for s in data["sizes"]), head=int(data["head"])
        )
        opt = OptimizerState(
            kind=int(data["opt_kind"]),
            lr=float(data["opt_lr"]),
            total_steps=int(data["opt_total_steps"]),
            schedule=int(data["opt_schedule"]),
            beta1=float(data["opt_beta1"]),
            beta2=float(data["opt_beta2"]),
            eps=float(data["opt_eps"]),
            step=int(data["opt_step"]),
            m=data["opt_m"].copy(),
            v=data["opt_v"].copy(),
        )
        bias = BiasTable(
            mu_z=data["mu_z"].copy(),
            history=data["history"].copy(),
            updates_applied=data["updates_applied"].copy(),
        )
        rng = np.random.default_rng()
        rng.bit_generator.state = json.loads(bytes(data["rng_state"]).decode())
        return TrainerState(
            arch=arch,
            params=data["params"].copy(),
            opt=opt,
            bias=bias,
            epoch=int(data["epoch"]),
            shuffle_rng=rng,
        )
