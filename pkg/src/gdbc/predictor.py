"""Differentiable regressors used as desk-scale quality predictors.

Every architecture is a fully-connected stack with tanh hidden activations,
stored as one flat float64 parameter vector. Two heads exist: a scalar head
(the last layer has width 1) and a binned head (softmax over K score bins,
read out as the expected bin center). Descriptor strings:

    linear            affine map directly from features to a scalar
    mlp:16,8          tanh hidden layers of widths 16 and 8, scalar output
    binned:10         softmax over 10 bins on linear logits
    mlp:32+binned:10  tanh hidden layers followed by a 10-bin softmax head
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HEAD_SCALAR = 0
HEAD_SOFTMAX = 1


@dataclass(frozen=True)
class Architecture:
    """Layer layout of a predictor: widths, head kind, flat-parameter offsets."""

    sizes: tuple[int, ...]
    head: int

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ValueError("architecture needs at least input and output widths")
        if any(s < 1 for s in self.sizes):
            raise ValueError(f"layer widths must be positive, got {self.sizes}")
        if self.head not in (HEAD_SCALAR, HEAD_SOFTMAX):
            raise ValueError(f"unknown head kind {self.head}")
        if self.head == HEAD_SCALAR and self.sizes[-1] != 1:
            raise ValueError("scalar head requires output width 1")
        if self.head == HEAD_SOFTMAX and self.sizes[-1] < 2:
            raise ValueError("binned head requires at least 2 bins")

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(o * i + o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    def layer_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """(weight offsets, bias offsets) of each layer in the flat vector."""
        off_w = np.zeros(self.n_layers, dtype=np.int64)
        off_b = np.zeros(self.n_layers, dtype=np.int64)
        pos = 0
        for l in range(self.n_layers):
            i, o = self.sizes[l], self.sizes[l + 1]
            off_w[l] = pos
            off_b[l] = pos + o * i
            pos += o * i + o
        return off_w, off_b

    def bin_centers(self) -> np.ndarray:
        """Centers (k + 0.5) / K of the binned head; scalar head has none."""
        if self.head != HEAD_SOFTMAX:
            raise ValueError("bin centers only exist for the binned head")
        k = self.sizes[-1]
        return (np.arange(k, dtype=np.float64) + 0.5) / k

    def sizes_array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=np.int64)


def parse_architecture(descriptor: str, input_dim: int) -> Architecture:
    """Build an Architecture from a descriptor string (see module docstring)."""
    if input_dim < 1:
        raise ValueError(f"input_dim must be positive, got {input_dim}")
    desc = descriptor.strip()
    hidden: list[int] = []
    head = HEAD_SCALAR
    out = 1
    body = desc
    if "+" in desc:
        body, head_part = desc.split("+", 1)
        if not head_part.startswith("binned:"):
            raise ValueError(f"unknown head descriptor {head_part!r} in {descriptor!r}")
        head = HEAD_SOFTMAX
        out = _parse_int(head_part[len("binned:"):], descriptor)
        body = body.strip()
    if body == "linear":
        pass
    elif body.startswith("mlp:"):
        hidden = [_parse_int(tok, descriptor) for tok in body[len("mlp:"):].split(",")]
    elif body.startswith("binned:"):
        if head == HEAD_SOFTMAX:
            raise ValueError(f"duplicate binned head in {descriptor!r}")
        head = HEAD_SOFTMAX
        out = _parse_int(body[len("binned:"):], descriptor)
    else:
        raise ValueError(f"unknown architecture descriptor {descriptor!r}")
    return Architecture(sizes=(input_dim, *hidden, out), head=head)


def _parse_int(token: str, descriptor: str) -> int:
    try:
        value = int(token.strip())
    except ValueError:
        raise ValueError(f"bad width {token!r} in descriptor {descriptor!r}") from None
    if value < 1:
        raise ValueError(f"widths must be positive in descriptor {descriptor!r}")
    return value


def init_params(arch: Architecture, seed: int) -> np.ndarray:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for weights and biases."""
    rng = np.random.default_rng(seed)
    params = np.empty(arch.n_params, dtype=np.float64)
    pos = 0
    for l in range(arch.n_layers):
        i, o = arch.sizes[l], arch.sizes[l + 1]
        bound = 1.0 / np.sqrt(i)
        params[pos:pos + o * i] = rng.uniform(-bound, bound, size=o * i)
        pos += o * i
        params[pos:pos + o] = rng.uniform(-bound, bound, size=o)
        pos += o
    return params


def _check_shapes(arch: Architecture, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != arch.input_dim:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match architecture input {arch.input_dim}"
        )
    if params.shape != (arch.n_params,):
        raise ValueError(
            f"parameter vector has shape {params.shape}, expected ({arch.n_params},)"
        )
    return x


def _forward_layers(arch: Architecture, params: np.ndarray, x: np.ndarray) -> list[np.ndarray]:
    """All layer outputs; hidden entries are post-tanh, the last is raw logits."""
    off_w, off_b = arch.layer_offsets()
    acts = [x]
    h = x
    for l in range(arch.n_layers):
        i, o = arch.sizes[l], arch.sizes[l + 1]
        w = params[off_w[l]:off_w[l] + o * i].reshape(o, i)
        b = params[off_b[l]:off_b[l] + o]
        z = h @ w.T + b
        h = np.tanh(z) if l < arch.n_layers - 1 else z
        acts.append(h)
    return acts


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(arch: Architecture, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Raw head output: (n,) scores for the scalar head, (n, K) probabilities for binned."""
    x = _check_shapes(arch, params, x)
    out = _forward_layers(arch, params, x)[-1]
    if arch.head == HEAD_SCALAR:
        return out[:, 0]
    return softmax(out)


def predict(arch: Architecture, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Scalar quality prediction; the binned head reads out its expected bin center."""
    out = forward(arch, params, x)
    if arch.head == HEAD_SCALAR:
        return out
    return out @ arch.bin_centers()


def _backprop(
    arch: Architecture,
    params: np.ndarray,
    acts: list[np.ndarray],
    dz: np.ndarray,
) -> np.ndarray:
    """Backpropagate from the last layer's dz through cached activations."""
    off_w, off_b = arch.layer_offsets()
    grad = np.zeros_like(params)
    for l in range(arch.n_layers - 1, -1, -1):
        i, o = arch.sizes[l], arch.sizes[l + 1]
        h_in = acts[l]
        grad[off_w[l]:off_w[l] + o * i] = (dz.T @ h_in).ravel()
        grad[off_b[l]:off_b[l] + o] = dz.sum(axis=0)
        if l > 0:
            w = params[off_w[l]:off_w[l] + o * i].reshape(o, i)
            dh = dz @ w
            dz = dh * (1.0 - acts[l] ** 2)
    return grad


def backward(
    arch: Architecture,
    params: np.ndarray,
    x: np.ndarray,
    upstream: np.ndarray,
) -> np.ndarray:
    """Gradient of sum_i <upstream_i, output_i> w.r.t. the flat parameters.

    ``upstream`` is (n,) against the scalar output, or (n, K) against the
    binned head's probabilities (the softmax Jacobian is applied here).
    """
    x = _check_shapes(arch, params, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    acts = _forward_layers(arch, params, x)
    if arch.head == HEAD_SCALAR:
        if upstream.shape != (x.shape[0],):
            raise ValueError("scalar-head upstream must have shape (n,)")
        dz = upstream[:, None]
    else:
        k = arch.sizes[-1]
        if upstream.shape != (x.shape[0], k):
            raise ValueError("binned-head upstream must have shape (n, K)")
        p = softmax(acts[-1])
        dz = p * (upstream - (upstream * p).sum(axis=1, keepdims=True))
    return _backprop(arch, params, acts, dz)
