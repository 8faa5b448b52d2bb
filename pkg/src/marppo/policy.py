"""Actor and critic networks plus the action distributions they emit.

Both networks share one shape: dense embedding with tanh, a core that is
either a single LSTM cell or a second dense+tanh of the same width, and a
dense head. The actor head emits categorical logits or a Gaussian mean with
a state-independent learned log standard deviation; the critic head emits a
scalar value.

Sequence runners operate on batches of fixed-length windows and apply reset
masks so hidden state never leaks across episode boundaries. Gradients are
truncated at window starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from marppo.nn import ContractError, Dense, LstmCell, ParamBlock

Array = np.ndarray

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class LstmState:
    """Hidden and cell vectors for one recurrent stream."""

    h: Array
    c: Array

    @classmethod
    def zeros(cls, size: int) -> "LstmState":
        return cls(np.zeros(size), np.zeros(size))

    def copy(self) -> "LstmState":
        return LstmState(self.h.copy(), self.c.copy())


@dataclass
class ActionDistribution:
    """Either categorical logits or a diagonal Gaussian (mean, log_std)."""

    logits: Array | None = None
    mean: Array | None = None
    log_std: Array | None = None

    def __post_init__(self) -> None:
        if (self.logits is None) == (self.mean is None):
            raise ContractError("distribution must be exactly one of categorical or gaussian")
        if self.mean is not None:
            if self.log_std is None:
                raise ContractError("gaussian distribution requires log_std")
            self.log_std = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)


# --- batched categorical ---------------------------------------------------


def softmax(logits: Array) -> Array:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: Array) -> Array:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def categorical_sample(logits: Array, rng: np.random.Generator) -> tuple[Array, Array]:
    """Samples one action per row; returns (actions, log_probs)."""
    p = softmax(logits)
    u = rng.random((logits.shape[0], 1))
    actions = (u > np.cumsum(p, axis=1)).sum(axis=1)
    actions = np.minimum(actions, logits.shape[1] - 1)
    lp = log_softmax(logits)
    return actions, lp[np.arange(logits.shape[0]), actions]


def categorical_logp_entropy(logits: Array, actions: Array) -> tuple[Array, Array, tuple]:
    lp = log_softmax(logits)
    p = np.exp(lp)
    logp = lp[np.arange(logits.shape[0]), actions]
    ent = -(p * lp).sum(axis=1)
    return logp, ent, (p, lp, actions, ent)


def categorical_backward(cache: tuple, dlogp: Array, dent: Array) -> Array:
    """Gradient of (dlogp . logp + dent . entropy) wrt the logits."""
    p, lp, actions, ent = cache
    B, K = p.shape
    dlogits = -p * dlogp[:, None]
    dlogits[np.arange(B), actions] += dlogp
    dlogits += dent[:, None] * (-p * (lp + ent[:, None]))
    return dlogits


# --- batched diagonal gaussian ---------------------------------------------


def gaussian_sample(mean: Array, log_std: Array, rng: np.random.Generator) -> tuple[Array, Array]:
    std = np.exp(log_std)
    actions = mean + std * rng.standard_normal(mean.shape)
    logp = gaussian_logp(mean, log_std, actions)
    return actions, logp


def gaussian_logp(mean: Array, log_std: Array, actions: Array) -> Array:
    z = (actions - mean) / np.exp(log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=-1)


def gaussian_entropy(log_std: Array, batch: int) -> Array:
    per = float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))
    return np.full(batch, per)


def gaussian_backward(mean: Array, log_std: Array, actions: Array,
                      dlogp: Array, dent: Array) -> tuple[Array, Array]:
    """Gradients of (dlogp . logp + dent . entropy) wrt mean and log_std."""
    std = np.exp(log_std)
    z = (actions - mean) / std
    dmean = dlogp[:, None] * z / std
    dls = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0) + dent.sum() * np.ones_like(log_std)
    return dmean, dls


# --- spec-facing single-sample ops ------------------------------------------


def sample_action(dist: ActionDistribution, rng: np.random.Generator):
    """Draws one action; returns (action, log_prob). Continuous actions are
    returned unclamped; clamping to [-1, 1] happens at the environment
    boundary."""
    if dist.logits is not None:
        a, lp = categorical_sample(dist.logits.reshape(1, -1), rng)
        return int(a[0]), float(lp[0])
    a, lp = gaussian_sample(dist.mean.reshape(1, -1), dist.log_std.reshape(-1), rng)
    return a[0], float(lp[0])


def log_prob_entropy(dist: ActionDistribution, action) -> tuple[float, float]:
    if dist.logits is not None:
        logp, ent, _ = categorical_logp_entropy(
            dist.logits.reshape(1, -1), np.array([int(action)])
        )
        return float(logp[0]), float(ent[0])
    mean = dist.mean.reshape(1, -1)
    ls = dist.log_std.reshape(-1)
    logp = gaussian_logp(mean, ls, np.asarray(action, dtype=np.float64).reshape(1, -1))
    ent = gaussian_entropy(ls, 1)
    return float(logp[0]), float(ent[0])


# --- cores -------------------------------------------------------------------


class RecurrentCore:
    """Single LSTM cell; the output is the hidden state itself."""

    def __init__(self, name: str, in_dim: int, hidden: int, rng: np.random.Generator):
        self.cell = LstmCell(name, in_dim, hidden, rng)
        self.hidden = hidden
        self.state_size = hidden

    @property
    def blocks(self) -> list[ParamBlock]:
        return self.cell.blocks

    def step(self, x: Array, h: Array, c: Array):
        h2, c2, cache = self.cell.forward(x, h, c)
        return h2, h2, c2, cache

    def step_backward(self, dout_plus_dh: Array, dc: Array, cache):
        return self.cell.backward(dout_plus_dh, dc, cache)


class FeedForwardCore:
    """Stateless substitute: a second dense+tanh of the same width."""

    def __init__(self, name: str, in_dim: int, hidden: int, rng: np.random.Generator):
        self.fc = Dense(name, in_dim, hidden, rng)
        self.hidden = hidden
        self.state_size = 0

    @property
    def blocks(self) -> list[ParamBlock]:
        return self.fc.blocks

    def step(self, x: Array, h: Array, c: Array):
        z, fc_cache = self.fc.forward(x)
        y = np.tanh(z)
        return y, h, c, (fc_cache, y)

    def step_backward(self, dout_plus_dh: Array, dc: Array, cache):
        fc_cache, y = cache
        dz = dout_plus_dh * (1.0 - y * y)
        dx = self.fc.backward(dz, fc_cache)
        b = dx.shape[0]
        return dx, np.zeros((b, 0)), np.zeros((b, 0))


class _Net:
    """Embedding + core + head, with batched window runners."""

    def __init__(self, name: str, in_dim: int, hidden: int, out_dim: int,
                 recurrent: bool, rng: np.random.Generator):
        self.name = name
        self.in_dim = in_dim
        self.hidden = hidden
        self.out_dim = out_dim
        self.recurrent = recurrent
        self.embed = Dense(f"{name}.embed", in_dim, hidden, rng)
        core_cls = RecurrentCore if recurrent else FeedForwardCore
        self.core = core_cls(f"{name}.core", hidden, hidden, rng)
        self.head = Dense(f"{name}.head", hidden, out_dim, rng)

    @property
    def blocks(self) -> list[ParamBlock]:
        return self.embed.blocks + self.core.blocks + self.head.blocks

    @property
    def state_size(self) -> int:
        return self.core.state_size

    def state_zeros(self, batch: int) -> tuple[Array, Array]:
        return np.zeros((batch, self.state_size)), np.zeros((batch, self.state_size))

    def zero_grad(self) -> None:
        for blk in self.blocks:
            blk.zero_grad()

    def step(self, x: Array, h: Array, c: Array):
        """One position for a batch of streams. Returns (out, h', c', cache)."""
        e, e_cache = self.embed.forward(np.atleast_2d(x))
        a = np.tanh(e)
        y, h2, c2, core_cache = self.core.step(a, h, c)
        out, head_cache = self.head.forward(y)
        return out, h2, c2, (e_cache, a, core_cache, head_cache)

    def run_window(self, inputs: Array, h0: Array, c0: Array, resets: Array | None):
        """Forward over a (B, L, in_dim) batch of windows.

        resets[b, k] = 1 zeroes stream b's state before position k. Returns
        (outs (B, L, out_dim), h_hist (B, L+1, S), c_hist, caches); history row
        k is the state entering position k after any reset, row L is final.
        """
        B, L, _ = inputs.shape
        h, c = h0.copy(), c0.copy()
        S = self.state_size
        h_hist = np.zeros((B, L + 1, S))
        c_hist = np.zeros((B, L + 1, S))
        outs = np.zeros((B, L, self.out_dim))
        caches = []
        for k in range(L):
            if resets is not None and S > 0:
                keep = 1.0 - resets[:, k : k + 1]
                h = h * keep
                c = c * keep
            h_hist[:, k] = h
            c_hist[:, k] = c
            out, h, c, cache = self.step(inputs[:, k], h, c)
            outs[:, k] = out
            caches.append(cache)
        h_hist[:, L] = h
        c_hist[:, L] = c
        return outs, h_hist, c_hist, caches

    def backward_window(self, douts: Array, caches: list, resets: Array | None) -> None:
        """Accumulates parameter grads for a run_window pass; truncates at k=0."""
        B, L, _ = douts.shape
        dh = np.zeros((B, self.state_size))
        dc = np.zeros((B, self.state_size))
        for k in reversed(range(L)):
            e_cache, a, core_cache, head_cache = caches[k]
            dy = self.head.backward(douts[:, k], head_cache)
            if self.state_size > 0:
                dy = dy + dh
            da, dh, dc = self.core.step_backward(dy, dc, core_cache)
            de = da * (1.0 - a * a)
            self.embed.backward(de, e_cache)
            if resets is not None and self.state_size > 0:
                keep = 1.0 - resets[:, k : k + 1]
                dh = dh * keep
                dc = dc * keep


class Critic(_Net):
    """Scalar value head over the shared network shape."""

    def __init__(self, in_dim: int, hidden: int, recurrent: bool, rng: np.random.Generator,
                 name: str = "critic"):
        super().__init__(name, in_dim, hidden, 1, recurrent, rng)

    def values_window(self, inputs: Array, h0: Array, c0: Array, resets: Array | None):
        outs, h_hist, c_hist, caches = self.run_window(inputs, h0, c0, resets)
        return outs[:, :, 0], h_hist, c_hist, caches


class Actor(_Net):
    """Parameter-shared policy head; one network drives every agent."""

    def __init__(self, obs_dim: int, hidden: int, recurrent: bool, rng: np.random.Generator,
                 n_actions: int | None = None, action_dim: int | None = None,
                 name: str = "actor"):
        if (n_actions is None) == (action_dim is None):
            raise ContractError("actor needs exactly one of n_actions or action_dim")
        self.discrete = n_actions is not None
        out_dim = n_actions if self.discrete else action_dim
        super().__init__(name, obs_dim, hidden, out_dim, recurrent, rng)
        if self.discrete:
            self.log_std = None
        else:
            self.log_std = ParamBlock.zeros(f"{name}.log_std", 1, action_dim)

    @property
    def blocks(self) -> list[ParamBlock]:
        base = super().blocks
        return base + [self.log_std] if self.log_std is not None else base

    def log_std_vector(self) -> Array:
        return np.clip(self.log_std.weights[0], LOG_STD_MIN, LOG_STD_MAX)

    def clamp_log_std(self) -> None:
        np.clip(self.log_std.weights, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std.weights)

    def distribution(self, out_row: Array) -> ActionDistribution:
        if self.discrete:
            return ActionDistribution(logits=out_row)
        return ActionDistribution(mean=out_row, log_std=self.log_std_vector())

    def sample_batch(self, outs: Array, rng: np.random.Generator) -> tuple[Array, Array]:
        """Samples one action per row of head outputs."""
        if self.discrete:
            return categorical_sample(outs, rng)
        return gaussian_sample(outs, self.log_std_vector(), rng)


def actor_forward(actor: Actor, obs: Array, state: LstmState) -> tuple[ActionDistribution, LstmState]:
    """Single-observation policy step; agent identity never enters."""
    out, h, c, _ = actor.step(obs.reshape(1, -1), state.h.reshape(1, -1), state.c.reshape(1, -1))
    return actor.distribution(out[0]), LstmState(h[0], c[0])


def critic_forward_meta(critic: Critic, entries: Array, state: LstmState,
                        resets: Array | None = None) -> tuple[Array, list[LstmState]]:
    """Runs the critic down one interleaved sequence.

    Returns the per-entry values and the state entering every position plus
    the final state, so evaluation can be split anywhere and resumed
    bit-exactly.
    """
    entries = np.asarray(entries, dtype=np.float64)
    if entries.ndim != 2 or entries.shape[1] != critic.in_dim:
        raise ContractError(f"critic expects (M, {critic.in_dim}) entries, got {entries.shape}")
    r = resets.reshape(1, -1) if resets is not None else None
    vals, h_hist, c_hist, _ = critic.values_window(
        entries[None, :, :], state.h.reshape(1, -1), state.c.reshape(1, -1), r
    )
    states = [LstmState(h_hist[0, k].copy(), c_hist[0, k].copy()) for k in range(entries.shape[0] + 1)]
    return vals[0], states
