"""Weighted team return and advantage estimation.

The cross-agent mixing weight ``beta`` in [0, 1] controls how much of the
other agents' signal enters each agent's targets. For agent i at step t the
weighted reward is

    rbar[t, i] = (r[t, i] + beta * sum_{j != i} r[t, j]) / N

and the same weighting applies to terminal values and one-step TD errors.
Note the division by N applies even at beta = 0, so the weighted estimator at
beta = 0 is the single-agent one scaled by 1/N, not the single-agent one.

All functions take time-major matrices: rewards (T, N), values (T+1, N) with
row T holding the terminal bootstrap values, and a shared done vector (T,).
Every recursion truncates after a done step; the bootstrap term is masked by
(1 - done).
"""

from __future__ import annotations

import numpy as np

from marppo.nn import ContractError

Array = np.ndarray


def _check_beta(beta: float) -> None:
    if not 0.0 <= beta <= 1.0:
        raise ContractError(f"beta must lie in [0, 1], got {beta}")


def _check_shapes(rewards: Array, dones: Array) -> tuple[int, int]:
    if rewards.ndim != 2:
        raise ContractError(f"rewards must be (T, N), got shape {rewards.shape}")
    T, N = rewards.shape
    if dones.shape != (T,):
        raise ContractError(f"dones must be ({T},), got shape {dones.shape}")
    return T, N


def weighted_mean_rewards(rewards: Array, beta: float) -> Array:
    """Per-agent weighted team signal for a (T, N) or (N,) array.

    r_i + beta * sum_{j != i} r_j, divided by N. Equals the plain team mean at
    beta = 1 and r_i / N at beta = 0.
    """
    _check_beta(beta)
    r = np.asarray(rewards, dtype=np.float64)
    n = r.shape[-1]
    others = r.sum(axis=-1, keepdims=True) - r
    # literal form: exact single-agent collapse (others is exactly zero)
    return (r + beta * others) / n


def discounted_returns(rewards: Array, terminal_values: Array, gamma: float,
                       beta: float, dones: Array) -> Array:
    """Weighted discounted returns by backward recursion.

    R[t, i] = rbar[t, i] + gamma * (1 - done[t]) * R[t+1, i], seeded past the
    horizon with the weighted terminal value vbar[i].
    """
    T, N = _check_shapes(rewards, dones)
    if terminal_values.shape != (N,):
        raise ContractError(f"terminal_values must be ({N},), got {terminal_values.shape}")
    rbar = weighted_mean_rewards(rewards, beta)
    vbar = weighted_mean_rewards(terminal_values, beta)
    out = np.zeros((T, N))
    nxt = vbar
    for t in range(T - 1, -1, -1):
        nxt = rbar[t] + gamma * (1.0 - dones[t]) * nxt
        out[t] = nxt
    return out


def multi_agent_deltas(rewards: Array, values: Array, gamma: float,
                       beta: float, dones: Array) -> Array:
    """Weighted one-step TD errors.

    td[t, j] = r[t, j] + gamma * (1 - done[t]) * V[t+1, j] - V[t, j], then the
    per-agent weighted mean over the team.
    """
    T, N = _check_shapes(rewards, dones)
    if values.shape != (T + 1, N):
        raise ContractError(f"values must be ({T + 1}, {N}), got {values.shape}")
    boot = gamma * (1.0 - dones)[:, None]
    td = rewards + boot * values[1:] - values[:-1]
    return weighted_mean_rewards(td, beta)


def gae(deltas: Array, gamma: float, lam: float, dones: Array) -> Array:
    """Generalized advantage recursion over precomputed deltas.

    A[t] = delta[t] + gamma * lam * (1 - done[t]) * A[t+1].
    """
    T, N = _check_shapes(deltas, dones)
    out = np.zeros((T, N))
    nxt = np.zeros(N)
    for t in range(T - 1, -1, -1):
        nxt = deltas[t] + gamma * lam * (1.0 - dones[t]) * nxt
        out[t] = nxt
    return out


def single_agent_gae(rewards: Array, values: Array, gamma: float, lam: float,
                     dones: Array) -> Array:
    """Standard per-agent GAE: no cross-agent terms, no 1/N factor.

    rewards is (T,) or (T, N); values has one extra leading row of bootstrap
    values at the end.
    """
    r = np.asarray(rewards, dtype=np.float64)
    squeeze = r.ndim == 1
    if squeeze:
        r = r[:, None]
        values = np.asarray(values, dtype=np.float64)[:, None]
    T, N = _check_shapes(r, dones)
    if values.shape != (T + 1, N):
        raise ContractError(f"values must be ({T + 1}, {N}), got {values.shape}")
    boot = gamma * (1.0 - dones)[:, None]
    td = r + boot * values[1:] - values[:-1]
    out = np.zeros((T, N))
    nxt = np.zeros(N)
    for t in range(T - 1, -1, -1):
        nxt = td[t] + gamma * lam * (1.0 - dones[t]) * nxt
        out[t] = nxt
    return out[:, 0] if squeeze else out


def single_agent_returns(rewards: Array, terminal_values: Array, gamma: float,
                         dones: Array) -> Array:
    """Standard per-agent discounted returns with masked bootstrap."""
    r = np.asarray(rewards, dtype=np.float64)
    squeeze = r.ndim == 1
    if squeeze:
        r = r[:, None]
        terminal_values = np.asarray(terminal_values, dtype=np.float64).reshape(1)
    T, N = _check_shapes(r, dones)
    out = np.zeros((T, N))
    nxt = np.asarray(terminal_values, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        nxt = r[t] + gamma * (1.0 - dones[t]) * nxt
        out[t] = nxt
    return out[:, 0] if squeeze else out


def normalize_advantages(adv: Array) -> tuple[Array, float, float]:
    """Batch standardization; returns (normalized, mean, std)."""
    mean = float(adv.mean())
    std = float(adv.std())
    return (adv - mean) / (std + 1e-8), mean, std
