"""Hot training and counting loops, once as numba @njit kernels and once in numpy.

The numpy twins are built from the package's own building blocks (predictor
backprop, optimizer apply, gate update), so they double as the reference
composition; the numba kernels fuse the same math into explicit loops. Both
share one calling convention, and ``get_kernels()`` hands back the set chosen
by the ``GDBC_BACKEND`` env flag. Agreement between the two is covered by
tests and measured by benchmarks/backend_benchmark.py.
"""

from __future__ import annotations

import math

import numpy as np

from . import predictor as P
from .backend import ACTIVE_BACKEND
from .calibration import _gate_batch
from .optim import OptimizerState

LOSS_GCE = 0
LOSS_SCE = 1

STATUS_OK = -1  # epoch status; >= 0 is the batch index where the loss blew up


# ---------------------------------------------------------------------------
# numpy twins
# ---------------------------------------------------------------------------

def _arch_from_raw(sizes: np.ndarray, head: int) -> P.Architecture:
    return P.Architecture(sizes=tuple(int(s) for s in sizes), head=int(head))


def _opt_from_raw(opt_kind, lr0, total_steps, beta1, beta2, adam_eps, schedule,
                  step0, m, v) -> OptimizerState:
    return OptimizerState(
        kind=int(opt_kind), lr=float(lr0), total_steps=int(total_steps),
        schedule=int(schedule), beta1=float(beta1), beta2=float(beta2),
        eps=float(adam_eps), step=int(step0), m=m, v=v,
    )


def regression_batch_step(
    arch: P.Architecture,
    params: np.ndarray,
    opt: OptimizerState,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    batch_idx: np.ndarray,
    mu_z: np.ndarray,
    hist: np.ndarray,
    updates: np.ndarray,
    enabled: bool,
    alpha: float,
    threshold: float,
) -> float:
    """One squared-error step on calibrated targets; mutates params/opt/bias arrays.

    Returns the batch loss. A non-finite loss skips the parameter update so
    the caller can abort with the trajectory intact.
    """
    bsz = x_batch.shape[0]
    acts = P._forward_layers(arch, params, x_batch)
    if arch.head == P.HEAD_SCALAR:
        f = acts[-1][:, 0]
    else:
        probs = P.softmax(acts[-1])
        f = probs @ arch.bin_centers()
    resid = y_batch - f
    _gate_batch(mu_z, hist, updates, batch_idx, resid, enabled, alpha, threshold)
    diff = f - (y_batch - mu_z[batch_idx])
    loss = float(np.mean(diff * diff))
    if not math.isfinite(loss):
        return loss
    u = 2.0 * diff / bsz
    if arch.head == P.HEAD_SCALAR:
        dz = u[:, None]
    else:
        dz = u[:, None] * probs * (arch.bin_centers()[None, :] - f[:, None])
    grad = P._backprop(arch, params, acts, dz)
    opt.apply(params, grad)
    return loss


def categorical_batch_step(
    arch: P.Architecture,
    params: np.ndarray,
    opt: OptimizerState,
    x_batch: np.ndarray,
    bins_batch: np.ndarray,
    loss_kind: int,
    q: float,
    w_ce: float,
    w_rce: float,
    clip: float,
) -> float:
    """One robust-classification step (GCE or SCE) on the binned head."""
    bsz = x_batch.shape[0]
    acts = P._forward_layers(arch, params, x_batch)
    probs = P.softmax(acts[-1])
    rows = np.arange(bsz)
    p_t = probs[rows, bins_batch]
    g = np.zeros_like(probs)
    if loss_kind == LOSS_GCE:
        loss = float(np.mean((1.0 - p_t ** q) / q))
        g[rows, bins_batch] = -(p_t ** (q - 1.0))
    else:
        ce = -np.log(p_t)
        rce = -clip * (1.0 - p_t)
        loss = float(np.mean(w_ce * ce + w_rce * rce))
        g[:, :] = -w_rce * clip
        g[rows, bins_batch] = -w_ce / p_t
    if not math.isfinite(loss):
        return loss
    g /= bsz
    dz = probs * (g - (g * probs).sum(axis=1, keepdims=True))
    grad = P._backprop(arch, params, acts, dz)
    opt.apply(params, grad)
    return loss


def _np_run_epoch_regression(
    params, m, v,
    opt_kind, lr0, total_steps, beta1, beta2, adam_eps, schedule, step0,
    sizes, off_w, off_b, head, centers,
    x, y_eta, perm, batch_size,
    mu_z, hist, updates,
    enabled, alpha, threshold,
    batch_losses,
):
    arch = _arch_from_raw(sizes, head)
    opt = _opt_from_raw(opt_kind, lr0, total_steps, beta1, beta2, adam_eps,
                        schedule, step0, m, v)
    n = x.shape[0]
    nb = batch_losses.shape[0]
    for b in range(nb):
        idx = perm[b * batch_size:min(n, (b + 1) * batch_size)]
        loss = regression_batch_step(
            arch, params, opt, x[idx], y_eta[idx], idx,
            mu_z, hist, updates, bool(enabled), float(alpha), float(threshold),
        )
        batch_losses[b] = loss
        if not math.isfinite(loss):
            return opt.step, b
    return opt.step, STATUS_OK


def _np_run_epoch_categorical(
    params, m, v,
    opt_kind, lr0, total_steps, beta1, beta2, adam_eps, schedule, step0,
    sizes, off_w, off_b, head, centers,
    x, target_bins, perm, batch_size,
    loss_kind, q, w_ce, w_rce, clip,
    batch_losses,
):
    arch = _arch_from_raw(sizes, head)
    opt = _opt_from_raw(opt_kind, lr0, total_steps, beta1, beta2, adam_eps,
                        schedule, step0, m, v)
    n = x.shape[0]
    nb = batch_losses.shape[0]
    for b in range(nb):
        idx = perm[b * batch_size:min(n, (b + 1) * batch_size)]
        loss = categorical_batch_step(
            arch, params, opt, x[idx], target_bins[idx],
            int(loss_kind), float(q), float(w_ce), float(w_rce), float(clip),
        )
        batch_losses[b] = loss
        if not math.isfinite(loss):
            return opt.step, b
    return opt.step, STATUS_OK


def _np_kendall_counts(x, y):
    n = x.shape[0]
    conc = disc = tx = ty = txy = 0
    chunk = 512
    for s in range(0, n - 1, chunk):
        e = min(n - 1, s + chunk)
        for i in range(s, e):
            a = x[i] - x[i + 1:]
            b = y[i] - y[i + 1:]
            az = a == 0.0
            bz = b == 0.0
            txy += int(np.count_nonzero(az & bz))
            tx += int(np.count_nonzero(az & ~bz))
            ty += int(np.count_nonzero(bz & ~az))
            same = (a > 0.0) == (b > 0.0)
            ok = ~az & ~bz
            conc += int(np.count_nonzero(same & ok))
            disc += int(np.count_nonzero(~same & ok))
    return conc, disc, tx, ty, txy


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def _forward_batch(params, sizes, off_w, off_b, act, aoff, bsz):
        n_layers = sizes.shape[0] - 1
        for l in range(n_layers):
            in_w = sizes[l]
            out_w = sizes[l + 1]
            a0 = aoff[l]
            a1 = aoff[l + 1]
            wo = off_w[l]
            bo = off_b[l]
            last = l == n_layers - 1
            for r in range(bsz):
                for j in range(out_w):
                    z = params[bo + j]
                    base = wo + j * in_w
                    for c in range(in_w):
                        z += params[base + c] * act[r, a0 + c]
                    act[r, a1 + j] = z if last else math.tanh(z)

    @njit(cache=True)
    def _backward_batch(params, grad, sizes, off_w, off_b, act, aoff,
                        dz_cur, dz_next, bsz):
        n_layers = sizes.shape[0] - 1
        for j in range(grad.shape[0]):
            grad[j] = 0.0
        for l in range(n_layers - 1, -1, -1):
            in_w = sizes[l]
            out_w = sizes[l + 1]
            a0 = aoff[l]
            wo = off_w[l]
            bo = off_b[l]
            for j in range(out_w):
                gb = 0.0
                for r in range(bsz):
                    gb += dz_cur[r, j]
                grad[bo + j] += gb
                base = wo + j * in_w
                for c in range(in_w):
                    gw = 0.0
                    for r in range(bsz):
                        gw += dz_cur[r, j] * act[r, a0 + c]
                    grad[base + c] += gw
            if l > 0:
                for r in range(bsz):
                    for c in range(in_w):
                        dh = 0.0
                        for j in range(out_w):
                            dh += params[wo + j * in_w + c] * dz_cur[r, j]
                        h = act[r, a0 + c]
                        dz_next[r, c] = dh * (1.0 - h * h)
                for r in range(bsz):
                    for c in range(in_w):
                        dz_cur[r, c] = dz_next[r, c]

    @njit(cache=True)
    def _apply_optimizer(params, grad, m, v, opt_kind, lr0, total_steps,
                         beta1, beta2, adam_eps, schedule, step):
        if schedule == 1:
            lr_t = lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
        else:
            lr_t = lr0
        if opt_kind == 0:
            for j in range(params.shape[0]):
                params[j] -= lr_t * grad[j]
        else:
            t = step + 1
            bc1 = 1.0 - beta1 ** t
            bc2 = 1.0 - beta2 ** t
            for j in range(params.shape[0]):
                m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j]
                v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j]
                params[j] -= lr_t * (m[j] / bc1) / (math.sqrt(v[j] / bc2) + adam_eps)

    @njit(cache=True)
    def run_epoch_regression(
        params, m, v,
        opt_kind, lr0, total_steps, beta1, beta2, adam_eps, schedule, step0,
        sizes, off_w, off_b, head, centers,
        x, y_eta, perm, batch_size,
        mu_z, hist, updates,
        enabled, alpha, threshold,
        batch_losses,
    ):
        n = x.shape[0]
        d = x.shape[1]
        n_layers = sizes.shape[0] - 1
        total_width = 0
        max_w = 0
        aoff = np.zeros(n_layers + 1, dtype=np.int64)
        for l in range(n_layers + 1):
            aoff[l] = total_width
            total_width += sizes[l]
            if sizes[l] > max_w:
                max_w = sizes[l]
        act = np.zeros((batch_size, total_width))
        dz_cur = np.zeros((batch_size, max_w))
        dz_next = np.zeros((batch_size, max_w))
        grad = np.zeros(params.shape[0])
        fvals = np.zeros(batch_size)
        diffs = np.zeros(batch_size)
        k_bins = sizes[n_layers]
        probs = np.zeros((batch_size, k_bins))
        win = hist.shape[1]
        step = step0
        nb = batch_losses.shape[0]
        for b in range(nb):
            s = b * batch_size
            e = min(n, s + batch_size)
            bsz = e - s
            for r in range(bsz):
                i = perm[s + r]
                for c in range(d):
                    act[r, c] = x[i, c]
            _forward_batch(params, sizes, off_w, off_b, act, aoff, bsz)
            a_last = aoff[n_layers]
            if head == 0:
                for r in range(bsz):
                    fvals[r] = act[r, a_last]
            else:
                for r in range(bsz):
                    mx = act[r, a_last]
                    for k in range(1, k_bins):
                        if act[r, a_last + k] > mx:
                            mx = act[r, a_last + k]
                    ssum = 0.0
                    for k in range(k_bins):
                        pv = math.exp(act[r, a_last + k] - mx)
                        probs[r, k] = pv
                        ssum += pv
                    fv = 0.0
                    for k in range(k_bins):
                        probs[r, k] /= ssum
                        fv += centers[k] * probs[r, k]
                    fvals[r] = fv
            loss_sum = 0.0
            for r in range(bsz):
                i = perm[s + r]
                resid = y_eta[i] - fvals[r]
                for w in range(win - 1):
                    hist[i, w] = hist[i, w + 1]
                hist[i, win - 1] = resid
                norm1 = 0.0
                for w in range(win):
                    norm1 += abs(hist[i, w])
                if enabled and norm1 > threshold:
                    mu_z[i] = alpha * mu_z[i] + (1.0 - alpha) * resid
                    updates[i] += 1
                diff = fvals[r] - (y_eta[i] - mu_z[i])
                diffs[r] = diff
                loss_sum += diff * diff
            batch_loss = loss_sum / bsz
            batch_losses[b] = batch_loss
            if not math.isfinite(batch_loss):
                return step, b
            if head == 0:
                for r in range(bsz):
                    dz_cur[r, 0] = 2.0 * diffs[r] / bsz
            else:
                for r in range(bsz):
                    u = 2.0 * diffs[r] / bsz
                    for k in range(k_bins):
                        dz_cur[r, k] = u * probs[r, k] * (centers[k] - fvals[r])
            _backward_batch(params, grad, sizes, off_w, off_b, act, aoff,
                            dz_cur, dz_next, bsz)
            _apply_optimizer(params, grad, m, v, opt_kind, lr0, total_steps,
                             beta1, beta2, adam_eps, schedule, step)
            step += 1
        return step, STATUS_OK

    @njit(cache=True)
    def run_epoch_categorical(
        params, m, v,
        opt_kind, lr0, total_steps, beta1, beta2, adam_eps, schedule, step0,
        sizes, off_w, off_b, head, centers,
        x, target_bins, perm, batch_size,
        loss_kind, q, w_ce, w_rce, clip,
        batch_losses,
    ):
        n = x.shape[0]
        d = x.shape[1]
        n_layers = sizes.shape[0] - 1
        total_width = 0
        max_w = 0
        aoff = np.zeros(n_layers + 1, dtype=np.int64)
        for l in range(n_layers + 1):
            aoff[l] = total_width
            total_width += sizes[l]
            if sizes[l] > max_w:
                max_w = sizes[l]
        act = np.zeros((batch_size, total_width))
        dz_cur = np.zeros((batch_size, max_w))
        dz_next = np.zeros((batch_size, max_w))
        grad = np.zeros(params.shape[0])
        k_bins = sizes[n_layers]
        probs = np.zeros((batch_size, k_bins))
        gvec = np.zeros((batch_size, k_bins))
        step = step0
        nb = batch_losses.shape[0]
        for b in range(nb):
            s = b * batch_size
            e = min(n, s + batch_size)
            bsz = e - s
            for r in range(bsz):
                i = perm[s + r]
                for c in range(d):
                    act[r, c] = x[i, c]
            _forward_batch(params, sizes, off_w, off_b, act, aoff, bsz)
            a_last = aoff[n_layers]
            loss_sum = 0.0
            for r in range(bsz):
                mx = act[r, a_last]
                for k in range(1, k_bins):
                    if act[r, a_last + k] > mx:
                        mx = act[r, a_last + k]
                ssum = 0.0
                for k in range(k_bins):
                    pv = math.exp(act[r, a_last + k] - mx)
                    probs[r, k] = pv
                    ssum += pv
                for k in range(k_bins):
                    probs[r, k] /= ssum
                tb = target_bins[perm[s + r]]
                p_t = probs[r, tb]
                if loss_kind == 0:
                    loss_sum += (1.0 - p_t ** q) / q
                    for k in range(k_bins):
                        gvec[r, k] = 0.0
                    gvec[r, tb] = -(p_t ** (q - 1.0))
                else:
                    loss_sum += w_ce * (-math.log(p_t)) + w_rce * (-clip * (1.0 - p_t))
                    for k in range(k_bins):
                        gvec[r, k] = -w_rce * clip
                    gvec[r, tb] = -w_ce / p_t
            batch_loss = loss_sum / bsz
            batch_losses[b] = batch_loss
            if not math.isfinite(batch_loss):
                return step, b
            for r in range(bsz):
                gp = 0.0
                for k in range(k_bins):
                    gp += gvec[r, k] * probs[r, k]
                for k in range(k_bins):
                    dz_cur[r, k] = probs[r, k] * (gvec[r, k] - gp) / bsz
            _backward_batch(params, grad, sizes, off_w, off_b, act, aoff,
                            dz_cur, dz_next, bsz)
            _apply_optimizer(params, grad, m, v, opt_kind, lr0, total_steps,
                             beta1, beta2, adam_eps, schedule, step)
            step += 1
        return step, STATUS_OK

    @njit(cache=True)
    def kendall_counts(x, y):
        n = x.shape[0]
        conc = 0
        disc = 0
        tx = 0
        ty = 0
        txy = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = x[i] - x[j]
                b = y[i] - y[j]
                if a == 0.0 and b == 0.0:
                    txy += 1
                elif a == 0.0:
                    tx += 1
                elif b == 0.0:
                    ty += 1
                elif (a > 0.0) == (b > 0.0):
                    conc += 1
                else:
                    disc += 1
        return conc, disc, tx, ty, txy

    return {
        "run_epoch_regression": run_epoch_regression,
        "run_epoch_categorical": run_epoch_categorical,
        "kendall_counts": kendall_counts,
    }


NUMPY_KERNELS = {
    "run_epoch_regression": _np_run_epoch_regression,
    "run_epoch_categorical": _np_run_epoch_categorical,
    "kendall_counts": _np_kendall_counts,
}

if ACTIVE_BACKEND == "numba":
    NUMBA_KERNELS = _build_numba_kernels()
    _ACTIVE = NUMBA_KERNELS
else:
    NUMBA_KERNELS = None
    _ACTIVE = NUMPY_KERNELS


def get_kernels() -> dict:
    """Kernel set selected by the GDBC_BACKEND env flag."""
    return _ACTIVE
