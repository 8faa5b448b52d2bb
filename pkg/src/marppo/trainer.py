"""Clipped-surrogate training over chunked recurrent minibatches.

One training iteration is: collect a rollout window from every env copy under
frozen parameters, evaluate the pre-update critic (interleaved across agents
for the full method, one stream per agent for the ablations), form targets and
advantages, then run several epochs of minibatch updates over fixed-length
window chunks. Chunks replay from the hidden states recorded during the
pre-update passes; those states go stale as parameters move within an
iteration, which is the usual truncated-replay compromise.

Variant routing:

  ff-nic / lstm-nic    per-agent returns and advantages; the team weight is
                       never read.
  ff-ica / lstm-ica    weighted cross-agent returns/advantages, critic still
                       runs one stream per agent.
  lstm-icf             weighted estimator plus the interleaved critic.

Every randomized step draws from its own seeded stream keyed by (seed,
purpose, iteration, ...), so a run is a pure function of its config and
same-seed reruns match byte for byte. Wall-clock time comes from an
injectable clock so logs can be made deterministic under test.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from marppo.advantage import (
    discounted_returns,
    gae,
    multi_agent_deltas,
    normalize_advantages,
    single_agent_gae,
    single_agent_returns,
)
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.nn import NumericError, adam_step, clip_grad_norm, load_tensors, save_tensors
from marppo.policy import (
    Actor,
    Critic,
    categorical_backward,
    categorical_logp_entropy,
    gaussian_backward,
    gaussian_entropy,
    gaussian_logp,
)
from marppo.rollout import (
    EnvRollout,
    MetaTrajectory,
    RolloutCarry,
    build_meta_trajectory,
    collect_rollout,
    critic_inputs,
    init_carry,
    value_pass,
    value_pass_per_agent,
)

Array = np.ndarray

# importance ratios are computed as exp(clamped log difference)
RATIO_EXP_CLAMP = 20.0


@dataclass
class TrainStats:
    """One row of training telemetry; field order is the CSV schema."""

    iteration: int
    mean_eval_return: float
    std_eval_return: float
    actor_loss: float
    critic_loss: float
    entropy: float
    clip_fraction: float
    wall_time_s: float

    CSV_FIELDS = ("iteration", "mean_eval_return", "std_eval_return", "actor_loss",
                  "critic_loss", "entropy", "clip_fraction", "wall_time_s")

    def row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


# --- losses -------------------------------------------------------------------


def prob_ratio(new_log_probs: Array, old_log_probs: Array) -> Array:
    """exp(new - old) with the exponent clamped to +/-RATIO_EXP_CLAMP."""
    diff = np.clip(new_log_probs - old_log_probs, -RATIO_EXP_CLAMP, RATIO_EXP_CLAMP)
    return np.exp(diff)


def clipped_surrogate(ratios: Array, advantages: Array, clip_eps: float) -> Array:
    """Pessimistic per-sample objective: min(r*A, clip(r, 1 +/- eps)*A)."""
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return np.minimum(unclipped, clipped)


def actor_loss(new_log_probs: Array, old_log_probs: Array, advantages: Array,
               entropies: Array, clip_eps: float, entropy_coef: float) -> float:
    """Negative mean surrogate minus the entropy bonus."""
    surr = clipped_surrogate(prob_ratio(new_log_probs, old_log_probs), advantages, clip_eps)
    return float(-surr.mean() - entropy_coef * entropies.mean())


def actor_loss_grads(new_log_probs: Array, old_log_probs: Array, advantages: Array,
                     entropies: Array, clip_eps: float, entropy_coef: float,
                     ) -> tuple[float, Array, Array, float, Array]:
    """Loss plus its gradients wrt per-sample log-probs and entropies.

    The clipped branch carries zero gradient; ties resolve to the unclipped
    branch (they only occur inside the clip band, where both agree). Returns
    (loss, dloss/dlogp, dloss/dentropy, clip_fraction, ratios).
    """
    diff = new_log_probs - old_log_probs
    clamped = np.clip(diff, -RATIO_EXP_CLAMP, RATIO_EXP_CLAMP)
    ratios = np.exp(clamped)
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surr = np.minimum(unclipped, clipped)
    n = new_log_probs.size
    loss = float(-surr.mean() - entropy_coef * entropies.mean())
    take_unclipped = unclipped <= clipped
    dsurr_dratio = np.where(take_unclipped, advantages, 0.0)
    dratio_dlogp = ratios * (np.abs(diff) < RATIO_EXP_CLAMP)
    dlogp = -dsurr_dratio * dratio_dlogp / n
    dent = np.full(n, -entropy_coef / n)
    clip_fraction = float(np.mean(np.abs(ratios - 1.0) > clip_eps))
    return loss, dlogp, dent, clip_fraction, ratios


def critic_loss(values: Array, targets: Array) -> float:
    d = values - targets
    return float(np.mean(d * d))


def critic_loss_grads(values: Array, targets: Array) -> tuple[float, Array]:
    d = values - targets
    return float(np.mean(d * d)), 2.0 * d / d.size


# --- evaluation ---------------------------------------------------------------


def evaluate_policy(actor: Actor, env_factory: Callable[[], object], episodes: int,
                    rng: np.random.Generator) -> tuple[float, float]:
    """Mean and std of total team return over fresh episodes, run in lockstep.

    Sampling stays stochastic; the critic is never involved. Both environments
    here have a fixed episode length, so no episode ends early.
    """
    envs = [env_factory() for _ in range(episodes)]
    n = envs[0].n_agents
    flat = np.concatenate([np.stack(env.reset(rng)) for env in envs], axis=0)
    h, c = actor.state_zeros(episodes * n)
    totals = np.zeros(episodes)
    for _ in range(envs[0].episode_len):
        out, h, c, _ = actor.step(flat, h, c)
        actions, _ = actor.sample_batch(out, rng)
        rows = []
        for k, env in enumerate(envs):
            next_obs, rewards, _done = env.step(actions[k * n:(k + 1) * n])
            totals[k] += float(np.sum(rewards))
            rows.append(np.stack(next_obs))
        flat = np.concatenate(rows, axis=0)
    return float(totals.mean()), float(totals.std())


# --- trainer ------------------------------------------------------------------


@dataclass
class _IterData:
    """Everything one iteration's minibatches index into."""

    rollouts: list[EnvRollout]
    metas: list[MetaTrajectory] | None
    critic_ins: list[Array]            # per env (T, N, dc)
    targets: list[Array]               # per env (T, N)
    advantages: list[Array]            # per env (T, N)
    meta_targets: list[Array] | None   # per env (T*N,), interleaved order
    meta_resets: list[Array] | None    # per env (T*N,)
    step_resets: list[Array]           # per env (T,)


class Trainer:
    """Owns the networks, env copies, and optimizer state for one run."""

    def __init__(self, config: ExperimentConfig, clock: Callable[[], float] = time.perf_counter,
                 env_factory: Callable[[], object] | None = None):
        config.validate()
        self.config = config
        self.clock = clock
        self._env_factory = env_factory or (lambda: make_env(config.env, config.n_agents))
        self.envs = [self._env_factory() for _ in range(config.n_envs)]
        env0 = self.envs[0]
        self.n_agents = env0.n_agents
        init_rng = self._rng(0)
        if env0.discrete:
            self._n_actions = env0.n_actions
            self.actor = Actor(env0.obs_dim, config.actor_hidden, config.recurrent,
                               init_rng, n_actions=env0.n_actions)
            act_width = env0.n_actions
        else:
            self._n_actions = None
            self.actor = Actor(env0.obs_dim, config.actor_hidden, config.recurrent,
                               init_rng, action_dim=env0.action_dim)
            act_width = env0.action_dim
        critic_in = env0.obs_dim + (act_width if config.critic_include_prev_action else 0)
        self.critic = Critic(critic_in, config.critic_hidden, config.recurrent, init_rng)
        self.carry = init_carry(self.envs, self.actor,
                                [self._rng(1, k) for k in range(config.n_envs)])
        self.iteration = 0
        self.actor_steps = 0
        self.critic_steps = 0

    # seed scheme: (seed, 0) init, (seed, 1, env) first resets,
    # (seed, 2, iter, env) rollouts, (seed, 3, iter) slot permutation,
    # (seed, 4, iter, epoch) minibatch shuffle, (seed, 5, iter) evaluation
    def _rng(self, *tail: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.config.seed,) + tail))

    # -- one iteration ----------------------------------------------------

    def train_iteration(self) -> TrainStats:
        cfg = self.config
        t_start = self.clock()
        self.iteration += 1
        it = self.iteration

        rngs = [self._rng(2, it, k) for k in range(cfg.n_envs)]
        rollouts, self.carry = collect_rollout(self.envs, self.actor, cfg.horizon,
                                               rngs, self.carry, cfg.rollout_workers)

        perm_rng = self._rng(3, it)
        if cfg.interleaved_critic:
            metas = [build_meta_trajectory(ro, perm_rng, cfg.critic_include_prev_action, self._n_actions)
                     for ro in rollouts]
            value_pass(metas, self.critic, rollouts)
        else:
            metas = None
            value_pass_per_agent(rollouts, self.critic, cfg.critic_include_prev_action, self._n_actions)

        data = self._prepare(rollouts, metas)
        actor_losses, critic_losses, entropies, clip_fracs = [], [], [], []

        T = cfg.horizon
        chunk_index = [(e, t0, min(t0 + cfg.chunk_len, T))
                       for e in range(cfg.n_envs) for t0 in range(0, T, cfg.chunk_len)]
        per_batch = cfg.chunks_per_batch()
        n_minibatches = cfg.num_minibatches(len(chunk_index))

        for epoch in range(cfg.epochs):
            order = self._rng(4, it, epoch).permutation(len(chunk_index))
            for mb in range(n_minibatches):
                picks = [chunk_index[j] for j in order[mb * per_batch:(mb + 1) * per_batch]]
                closs = self._critic_update(data, picks, it, epoch, mb)
                aloss, ent, cfrac, ratio_err = self._actor_update(data, picks, it, epoch, mb)
                if epoch == 0 and mb == 0 and ratio_err > 1e-6:
                    raise AssertionError(
                        f"pre-update ratios drifted from 1 by {ratio_err:.3e} "
                        f"at iteration {it}")
                critic_losses.append(closs)
                actor_losses.append(aloss)
                entropies.append(ent)
                clip_fracs.append(cfrac)

        mean_ret, std_ret = self.evaluate(self._rng(5, it))
        return TrainStats(
            iteration=it,
            mean_eval_return=mean_ret,
            std_eval_return=std_ret,
            actor_loss=float(np.mean(actor_losses)),
            critic_loss=float(np.mean(critic_losses)),
            entropy=float(np.mean(entropies)),
            clip_fraction=float(np.mean(clip_fracs)),
            wall_time_s=float(self.clock() - t_start),
        )

    def evaluate(self, rng: np.random.Generator) -> tuple[float, float]:
        return evaluate_policy(self.actor, self._env_factory, self.config.eval_episodes, rng)

    # -- targets and advantages ---------------------------------------------

    def _prepare(self, rollouts: list[EnvRollout], metas: list[MetaTrajectory] | None) -> _IterData:
        cfg = self.config
        targets, advs, critic_ins, step_resets = [], [], [], []
        for ro in rollouts:
            v_full = np.concatenate([ro.values, ro.terminal_values[None]], axis=0)
            if cfg.weighted_estimator:
                tgt = discounted_returns(ro.rewards, ro.terminal_values, cfg.gamma,
                                         cfg.beta, ro.dones)
                adv = gae(multi_agent_deltas(ro.rewards, v_full, cfg.gamma, cfg.beta, ro.dones),
                          cfg.gamma, cfg.lam, ro.dones)
            else:
                tgt = single_agent_returns(ro.rewards, ro.terminal_values, cfg.gamma, ro.dones)
                adv = single_agent_gae(ro.rewards, v_full, cfg.gamma, cfg.lam, ro.dones)
            targets.append(tgt)
            advs.append(adv)
            critic_ins.append(critic_inputs(ro.obs, ro.actions, ro.dones,
                                            cfg.critic_include_prev_action, self._n_actions))
            step_resets.append(ro.step_resets())
        if cfg.normalize_advantages:
            stacked = np.stack(advs)
            normed, _, _ = normalize_advantages(stacked)
            advs = [normed[e] for e in range(len(advs))]
        if metas is not None:
            meta_targets = [m.interleave(t) for m, t in zip(metas, targets)]
            meta_resets = [m.group_resets() for m in metas]
        else:
            meta_targets = None
            meta_resets = None
        return _IterData(rollouts, metas, critic_ins, targets, advs,
                         meta_targets, meta_resets, step_resets)

    # -- minibatch updates ----------------------------------------------------

    @staticmethod
    def _group_by_len(picks: Sequence[tuple[int, int, int]]) -> dict[int, list]:
        groups: dict[int, list] = {}
        for pick in picks:
            groups.setdefault(pick[2] - pick[1], []).append(pick)
        return groups

    def _critic_update(self, data: _IterData, picks, it: int, epoch: int, mb: int) -> float:
        cfg = self.config
        n = self.n_agents
        self.critic.zero_grad()
        staged = []
        sq_sum = 0.0
        count = 0
        for length, members in self._group_by_len(picks).items():
            if cfg.interleaved_critic:
                inputs = np.stack([data.metas[e].entries[t0 * n:t1 * n] for e, t0, t1 in members])
                h0 = np.stack([data.metas[e].state_h[t0] for e, t0, _ in members])
                c0 = np.stack([data.metas[e].state_c[t0] for e, t0, _ in members])
                resets = np.stack([data.meta_resets[e][t0 * n:t1 * n] for e, t0, t1 in members])
                tg = np.stack([data.meta_targets[e][t0 * n:t1 * n] for e, t0, t1 in members])
            else:
                inputs = np.concatenate(
                    [data.critic_ins[e][t0:t1].transpose(1, 0, 2) for e, t0, t1 in members])
                h0 = np.concatenate([data.rollouts[e].critic_h[t0] for e, t0, _ in members])
                c0 = np.concatenate([data.rollouts[e].critic_c[t0] for e, t0, _ in members])
                resets = np.concatenate(
                    [np.tile(data.step_resets[e][t0:t1], (n, 1)) for e, t0, t1 in members])
                tg = np.concatenate([data.targets[e][t0:t1].T for e, t0, t1 in members])
            resets = resets.copy()
            resets[:, 0] = 0.0  # stored chunk states are already post-reset
            vals, _, _, caches = self.critic.values_window(inputs, h0, c0, resets)
            staged.append((vals, tg, caches, resets))
            sq_sum += float(np.sum((vals - tg) ** 2))
            count += vals.size
        loss = sq_sum / count
        if not math.isfinite(loss):
            path = self._dump("critic", it, epoch, mb,
                              {f"values{i}": s[0] for i, s in enumerate(staged)}
                              | {f"targets{i}": s[1] for i, s in enumerate(staged)})
            raise NumericError(
                f"non-finite critic loss at iteration {it} epoch {epoch} minibatch {mb}; "
                f"minibatch dumped to {path}")
        for vals, tg, caches, resets in staged:
            dvals = 2.0 * (vals - tg) / count
            self.critic.backward_window(dvals[:, :, None], caches, resets)
        clip_grad_norm(self.critic.blocks, cfg.max_grad_norm)
        self.critic_steps += 1
        adam_step(self.critic.blocks, cfg.lr, self.critic_steps)
        return loss

    def _actor_update(self, data: _IterData, picks, it: int, epoch: int, mb: int,
                      ) -> tuple[float, float, float, float]:
        cfg = self.config
        n = self.n_agents
        actor = self.actor
        actor.zero_grad()
        staged = []
        logp_parts, ent_parts, old_parts, adv_parts = [], [], [], []
        for length, members in self._group_by_len(picks).items():
            obs = np.concatenate(
                [data.rollouts[e].obs[t0:t1].transpose(1, 0, 2) for e, t0, t1 in members])
            h0 = np.concatenate([data.rollouts[e].actor_h[t0] for e, t0, _ in members])
            c0 = np.concatenate([data.rollouts[e].actor_c[t0] for e, t0, _ in members])
            resets = np.concatenate(
                [np.tile(data.step_resets[e][t0:t1], (n, 1)) for e, t0, t1 in members])
            resets = resets.copy()
            resets[:, 0] = 0.0
            old = np.concatenate([data.rollouts[e].log_probs[t0:t1].T for e, t0, t1 in members])
            adv = np.concatenate([data.advantages[e][t0:t1].T for e, t0, t1 in members])
            outs, _, _, caches = actor.run_window(obs, h0, c0, resets)
            rows = outs.shape[0] * outs.shape[1]
            if actor.discrete:
                acts = np.concatenate(
                    [data.rollouts[e].actions[t0:t1].T for e, t0, t1 in members])
                lp, ent, cache = categorical_logp_entropy(
                    outs.reshape(rows, -1), acts.reshape(rows))
                staged.append(("d", outs.shape, caches, resets, cache))
            else:
                acts = np.concatenate(
                    [data.rollouts[e].actions[t0:t1].transpose(1, 0, 2) for e, t0, t1 in members])
                mean_rows = outs.reshape(rows, -1)
                act_rows = acts.reshape(rows, -1)
                ls = actor.log_std_vector()
                lp = gaussian_logp(mean_rows, ls, act_rows)
                ent = gaussian_entropy(ls, rows)
                staged.append(("g", outs.shape, caches, resets, (mean_rows, act_rows, ls)))
            logp_parts.append(lp)
            ent_parts.append(ent)
            old_parts.append(old.reshape(-1))
            adv_parts.append(adv.reshape(-1))
        logp = np.concatenate(logp_parts)
        ents = np.concatenate(ent_parts)
        olds = np.concatenate(old_parts)
        advs = np.concatenate(adv_parts)
        loss, dlogp, dent, clip_fraction, ratios = actor_loss_grads(
            logp, olds, advs, ents, cfg.clip_eps, cfg.entropy_coef)
        if not math.isfinite(loss):
            path = self._dump("actor", it, epoch, mb,
                              {"new_log_probs": logp, "old_log_probs": olds,
                               "advantages": advs, "entropies": ents})
            raise NumericError(
                f"non-finite actor loss at iteration {it} epoch {epoch} minibatch {mb}; "
                f"minibatch dumped to {path}")
        offset = 0
        for kind, shape, caches, resets, extra in staged:
            rows = shape[0] * shape[1]
            dlp = dlogp[offset:offset + rows]
            de = dent[offset:offset + rows]
            offset += rows
            if kind == "d":
                dlogits = categorical_backward(extra, dlp, de)
                actor.backward_window(dlogits.reshape(shape), caches, resets)
            else:
                mean_rows, act_rows, ls = extra
                dmean, dls = gaussian_backward(mean_rows, ls, act_rows, dlp, de)
                actor.log_std.grads[0] += dls
                actor.backward_window(dmean.reshape(shape), caches, resets)
        clip_grad_norm(actor.blocks, cfg.max_grad_norm)
        self.actor_steps += 1
        adam_step(actor.blocks, cfg.lr, self.actor_steps)
        if not actor.discrete:
            actor.clamp_log_std()
        ratio_err = float(np.max(np.abs(ratios - 1.0))) if ratios.size else 0.0
        return loss, float(ents.mean()), clip_fraction, ratio_err

    @staticmethod
    def _dump(tag: str, it: int, epoch: int, mb: int, arrays: dict[str, Array]) -> str:
        path = os.path.join(tempfile.gettempdir(), f"marppo-{tag}-it{it}-e{epoch}-mb{mb}.npz")
        np.savez(path, **arrays)
        return path

    # -- checkpointing ----------------------------------------------------

    def state_tensors(self) -> dict[str, Array]:
        tensors: dict[str, Array] = {}
        for blk in self.actor.blocks + self.critic.blocks:
            tensors[blk.name] = blk.weights
            tensors[f"{blk.name}#m"] = blk.adam_m
            tensors[f"{blk.name}#v"] = blk.adam_v
        for k, env in enumerate(self.envs):
            for key, arr in env.get_state().items():
                tensors[f"env{k}.{key}"] = np.asarray(arr, dtype=np.float64)
            tensors[f"carry{k}.obs"] = self.carry.obs[k]
            if self.actor.state_size > 0:
                tensors[f"carry{k}.h"] = self.carry.actor_h[k]
                tensors[f"carry{k}.c"] = self.carry.actor_c[k]
        return tensors

    def save_checkpoint(self, path: str) -> None:
        save_tensors(path, self.state_tensors(), {
            "iteration": self.iteration,
            "actor_steps": self.actor_steps,
            "critic_steps": self.critic_steps,
        })

    def load_checkpoint(self, path: str) -> None:
        tensors, meta = load_tensors(path)
        for blk in self.actor.blocks + self.critic.blocks:
            blk.weights[...] = tensors[blk.name].reshape(blk.weights.shape)
            blk.adam_m[...] = tensors[f"{blk.name}#m"].reshape(blk.adam_m.shape)
            blk.adam_v[...] = tensors[f"{blk.name}#v"].reshape(blk.adam_v.shape)
        for k, env in enumerate(self.envs):
            env.set_state({key: tensors[f"env{k}.{key}"] for key in env.get_state()})
            self.carry.obs[k] = tensors[f"carry{k}.obs"].reshape(self.carry.obs[k].shape).copy()
            if self.actor.state_size > 0:
                self.carry.actor_h[k] = tensors[f"carry{k}.h"].copy()
                self.carry.actor_c[k] = tensors[f"carry{k}.c"].copy()
        self.iteration = meta["iteration"]
        self.actor_steps = meta["actor_steps"]
        self.critic_steps = meta["critic_steps"]
