"""Reverse-mode building blocks for the recurrent actor and critic.

Everything is float64. Layers cache whatever their backward pass needs and
accumulate parameter gradients into ``ParamBlock.grads``; there is no
computation graph. Forward passes are pure functions of (inputs, weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Array = np.ndarray

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = "marppo-checkpoint"
CHECKPOINT_VERSION = 1


class ContractError(ValueError):
    """A caller violated a documented precondition."""


class NumericError(FloatingPointError):
    """A non-finite value reached a numeric kernel."""


def _f64(a: Array) -> Array:
    return np.ascontiguousarray(a, dtype=np.float64)


@dataclass
class ParamBlock:
    """One named parameter tensor plus its gradient and Adam moments.

    All four arrays share one shape. ``grads`` accumulates across backward
    calls until an optimizer step zeroes it.
    """

    name: str
    weights: Array
    grads: Array = field(default=None)  # type: ignore[assignment]
    adam_m: Array = field(default=None)  # type: ignore[assignment]
    adam_v: Array = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.weights = _f64(self.weights)
        for attr in ("grads", "adam_m", "adam_v"):
            if getattr(self, attr) is None:
                setattr(self, attr, np.zeros_like(self.weights))
            else:
                got = _f64(getattr(self, attr))
                if got.shape != self.weights.shape:
                    raise ContractError(
                        f"block {self.name!r}: {attr} shape {got.shape} != weights shape {self.weights.shape}"
                    )
                setattr(self, attr, got)

    @classmethod
    def uniform(cls, name: str, rows: int, cols: int, rng: np.random.Generator, fan_in: int | None = None) -> "ParamBlock":
        """Uniform(-k, k) init with k = 1/sqrt(fan_in); fan_in defaults to cols."""
        k = 1.0 / math.sqrt(fan_in if fan_in is not None else cols)
        return cls(name, rng.uniform(-k, k, size=(rows, cols)))

    @classmethod
    def zeros(cls, name: str, rows: int, cols: int) -> "ParamBlock":
        return cls(name, np.zeros((rows, cols)))

    def zero_grad(self) -> None:
        self.grads[...] = 0.0


class Dense:
    """Affine map ``y = x @ W.T + b`` over a batch of row vectors."""

    def __init__(self, name: str, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        if in_dim <= 0 or out_dim <= 0:
            raise ContractError(f"dense {name!r}: dims must be positive, got ({in_dim}, {out_dim})")
        if rng is None:
            w = ParamBlock.zeros(f"{name}.w", out_dim, in_dim)
        else:
            w = ParamBlock.uniform(f"{name}.w", out_dim, in_dim, rng, fan_in=in_dim)
        self.w = w
        self.b = ParamBlock.zeros(f"{name}.b", 1, out_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim

    @property
    def blocks(self) -> list[ParamBlock]:
        return [self.w, self.b]

    def forward(self, x: Array) -> tuple[Array, Array]:
        """Returns (y, cache); cache is the input, needed by backward."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ContractError(f"dense {self.w.name!r}: expected (B, {self.in_dim}), got {x.shape}")
        y = x @ self.w.weights.T + self.b.weights
        return y, x

    def backward(self, dy: Array, cache: Array) -> Array:
        """Accumulates dW, db; returns dL/dx."""
        x = cache
        self.w.grads += dy.T @ x
        self.b.grads += dy.sum(axis=0, keepdims=True)
        return dy @ self.w.weights


def _sigmoid(z: Array) -> Array:
    # numerically stable on both tails
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LstmCell:
    """Single standard LSTM cell with packed gates.

    Gate order along the packed axis: input, forget, candidate, output.
    Sigmoid input/forget/output gates, tanh candidate and output squash.
    Forget-gate bias starts at 1.0.
    """

    def __init__(self, name: str, in_dim: int, hidden: int, rng: np.random.Generator):
        if in_dim <= 0 or hidden <= 0:
            raise ContractError(f"lstm {name!r}: dims must be positive, got ({in_dim}, {hidden})")
        self.wx = ParamBlock.uniform(f"{name}.wx", 4 * hidden, in_dim, rng, fan_in=in_dim)
        self.wh = ParamBlock.uniform(f"{name}.wh", 4 * hidden, hidden, rng, fan_in=hidden)
        b = np.zeros((1, 4 * hidden))
        b[0, hidden : 2 * hidden] = 1.0
        self.b = ParamBlock(f"{name}.b", b)
        self.in_dim = in_dim
        self.hidden = hidden

    @property
    def blocks(self) -> list[ParamBlock]:
        return [self.wx, self.wh, self.b]

    def forward(self, x: Array, h: Array, c: Array) -> tuple[Array, Array, tuple]:
        """One step over a batch. Returns (h', c', cache)."""
        x = np.asarray(x, dtype=np.float64)
        if not np.isfinite(x).all():
            raise NumericError(f"lstm {self.wx.name!r}: non-finite input")
        H = self.hidden
        z = x @ self.wx.weights.T + h @ self.wh.weights.T + self.b.weights
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache = (x, h, c, i, f, g, o, tc)
        return h_new, c_new, cache

    def backward(self, dh: Array, dc: Array, cache: tuple) -> tuple[Array, Array, Array]:
        """Given dL/dh' and dL/dc', accumulates weight grads; returns (dx, dh_prev, dc_prev)."""
        x, h, c, i, f, g, o, tc = cache
        do = dh * tc
        dct = dc + dh * o * (1.0 - tc * tc)
        di = dct * g
        df = dct * c
        dg = dct * i
        dc_prev = dct * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        self.wx.grads += dz.T @ x
        self.wh.grads += dz.T @ h
        self.b.grads += dz.sum(axis=0, keepdims=True)
        dx = dz @ self.wx.weights
        dh_prev = dz @ self.wh.weights
        return dx, dh_prev, dc_prev


def adam_step(blocks: Sequence[ParamBlock], lr: float, t: int,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> None:
    """Bias-corrected Adam update in place; zeroes grads afterwards.

    ``t`` is the 1-based step count shared by all blocks in the call.
    """
    if t < 1:
        raise ContractError(f"adam step count must be >= 1, got {t}")
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for blk in blocks:
        g = blk.grads
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in block {blk.name!r}")
        blk.adam_m *= beta1
        blk.adam_m += (1.0 - beta1) * g
        blk.adam_v *= beta2
        blk.adam_v += (1.0 - beta2) * (g * g)
        m_hat = blk.adam_m / bc1
        v_hat = blk.adam_v / bc2
        blk.weights -= lr * m_hat / (np.sqrt(v_hat) + eps)
        blk.zero_grad()


def clip_grad_norm(blocks: Sequence[ParamBlock], max_norm: float) -> float:
    """Scales all grads by min(1, max_norm / global_l2_norm); returns the factor."""
    if max_norm <= 0:
        raise ContractError(f"max_norm must be positive, got {max_norm}")
    total = 0.0
    for blk in blocks:
        total += float(np.sum(blk.grads * blk.grads))
    norm = math.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return 1.0
    factor = max_norm / norm
    for blk in blocks:
        blk.grads *= factor
    return factor


# ---------------------------------------------------------------------------
# checkpoint format: plain text, versioned header, then named blocks.
#   line 1: "marppo-checkpoint <version> [key=value ...]"
#   per tensor: "<name> <rows> <cols>" followed by <rows> lines of repr values.
# repr round-trips float64 exactly, so save/load is bit-exact.


def save_tensors(path: str, tensors: dict[str, Array], metadata: dict[str, int] | None = None) -> None:
    meta = metadata or {}
    with open(path, "w", encoding="ascii") as fh:
        head = f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"
        if meta:
            head += " " + " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
        fh.write(head + "\n")
        for name in sorted(tensors):
            arr = np.atleast_2d(np.asarray(tensors[name], dtype=np.float64))
            fh.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
            for row in arr:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_tensors(path: str) -> tuple[dict[str, Array], dict[str, int]]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) < 2 or header[0] != CHECKPOINT_MAGIC:
            raise ContractError(f"{path}: not a checkpoint file")
        if int(header[1]) != CHECKPOINT_VERSION:
            raise ContractError(f"{path}: unsupported checkpoint version {header[1]}")
        metadata = {}
        for item in header[2:]:
            k, _, v = item.partition("=")
            metadata[k] = int(v)
        tensors: dict[str, Array] = {}
        while True:
            line = fh.readline()
            if not line:
                break
            if not line.strip():
                continue
            name, rows, cols = line.split()
            rows, cols = int(rows), int(cols)
            data = np.empty((rows, cols))
            for r in range(rows):
                vals = fh.readline().split()
                if len(vals) != cols:
                    raise ContractError(f"{path}: block {name!r} row {r} has {len(vals)} values, expected {cols}")
                data[r] = [float(v) for v in vals]
            tensors[name] = data
    return tensors, metadata


def save_blocks(path: str, blocks: Iterable[ParamBlock], metadata: dict[str, int] | None = None,
                with_optimizer: bool = True) -> None:
    """Writes ParamBlocks (and optionally their Adam moments) as named blocks."""
    tensors: dict[str, Array] = {}
    for blk in blocks:
        tensors[blk.name] = blk.weights
        if with_optimizer:
            tensors[f"{blk.name}#m"] = blk.adam_m
            tensors[f"{blk.name}#v"] = blk.adam_v
    save_tensors(path, tensors, metadata)


def load_into_blocks(path: str, blocks: Iterable[ParamBlock]) -> dict[str, int]:
    """Restores weights (and Adam moments when present) by block name."""
    tensors, metadata = load_tensors(path)
    for blk in blocks:
        if blk.name not in tensors:
            raise ContractError(f"{path}: missing block {blk.name!r}")
        got = tensors[blk.name]
        want = np.atleast_2d(blk.weights)
        if got.shape != want.shape:
            raise ContractError(f"{path}: block {blk.name!r} shape {got.shape}, expected {want.shape}")
        blk.weights[...] = got.reshape(blk.weights.shape)
        for suffix, attr in (("#m", "adam_m"), ("#v", "adam_v")):
            key = blk.name + suffix
            if key in tensors:
                getattr(blk, attr)[...] = tensors[key].reshape(blk.weights.shape)
    return metadata
