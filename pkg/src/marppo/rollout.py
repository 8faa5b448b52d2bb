"""Experience collection and the cross-agent interleaved critic sequence.

A rollout window is ``horizon`` env steps from each of E independent
environment copies, collected under frozen actor parameters. Episodes that
end inside a window reset and continue within it, with done flags marking the
boundaries; actor hidden states reset to zeros there.

The critic for the full method does not see one sequence per agent: all
agents' inputs for a time step are interleaved into a single sequence

    (in[t=0, slot 0], ..., in[t=0, slot N-1], in[t=1, slot 0], ...)

and the critic's hidden state flows across agents within a step and on across
steps. Slot s at step t holds agent ``order_map[t][s]``; with two agents the
order is fixed, with more it is one uniform draw per rollout window.

Training consumes contiguous chunks of ``chunk_len`` env steps. Each chunk
stores the hidden states that entered it during the pre-update pass, so
minibatches can replay from the middle of a window without rerunning the
prefix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from marppo.nn import ContractError, NumericError
from marppo.policy import Actor, Critic, LstmState

Array = np.ndarray


class RolloutError(RuntimeError):
    """An environment misbehaved during collection."""


@dataclass
class Transition:
    """One agent's view of one env step."""

    agent_id: int
    t: int
    obs: Array
    action: object
    reward: float
    done: bool
    old_log_prob: float
    old_value: float | None = None


@dataclass
class AgentTrajectory:
    """One agent's slice of a rollout window."""

    agent_id: int
    obs: Array          # (T, obs_dim)
    actions: Array      # (T,) ints or (T, action_dim) floats
    rewards: Array      # (T,)
    dones: Array        # (T,)
    log_probs: Array    # (T,)
    initial_state: LstmState
    values: Array | None = None

    @property
    def horizon(self) -> int:
        return self.obs.shape[0]

    def transitions(self) -> list[Transition]:
        out = []
        for t in range(self.horizon):
            out.append(Transition(
                agent_id=self.agent_id,
                t=t,
                obs=self.obs[t],
                action=self.actions[t],
                reward=float(self.rewards[t]),
                done=bool(self.dones[t]),
                old_log_prob=float(self.log_probs[t]),
                old_value=None if self.values is None else float(self.values[t]),
            ))
        return out


@dataclass
class EnvRollout:
    """Column store for one environment copy's window."""

    env_index: int
    obs: Array            # (T, N, obs_dim)
    actions: Array        # (T, N) or (T, N, action_dim)
    rewards: Array        # (T, N)
    dones: Array          # (T,)
    log_probs: Array      # (T, N)
    final_obs: Array      # (N, obs_dim), after the last step (post-reset when done)
    actor_h: Array        # (T, N, S), state entering step t
    actor_c: Array
    values: Array | None = None           # (T, N), filled by a value pass
    terminal_values: Array | None = None  # (N,)
    critic_h: Array | None = None         # states entering each step's critic group
    critic_c: Array | None = None

    @property
    def horizon(self) -> int:
        return self.obs.shape[0]

    @property
    def n_agents(self) -> int:
        return self.obs.shape[1]

    def agent_trajectory(self, i: int) -> AgentTrajectory:
        return AgentTrajectory(
            agent_id=i,
            obs=self.obs[:, i],
            actions=self.actions[:, i],
            rewards=self.rewards[:, i],
            dones=self.dones,
            log_probs=self.log_probs[:, i],
            initial_state=LstmState(self.actor_h[0, i].copy(), self.actor_c[0, i].copy()),
            values=None if self.values is None else self.values[:, i],
        )

    def step_resets(self) -> Array:
        """resets[t] = 1 when hidden state must clear before step t."""
        r = np.zeros(self.horizon)
        r[1:] = self.dones[:-1]
        return r


@dataclass
class RolloutCarry:
    """What persists between consecutive windows of the same run."""

    obs: list[Array]      # per env: (N, obs_dim)
    actor_h: list[Array]  # per env: (N, S)
    actor_c: list[Array]

    def copy(self) -> "RolloutCarry":
        return RolloutCarry(
            [o.copy() for o in self.obs],
            [h.copy() for h in self.actor_h],
            [c.copy() for c in self.actor_c],
        )


def init_carry(envs: Sequence, actor: Actor, rngs: Sequence[np.random.Generator]) -> RolloutCarry:
    obs, hs, cs = [], [], []
    for env, rng in zip(envs, rngs):
        obs.append(np.stack(env.reset(rng)))
        h, c = actor.state_zeros(env.n_agents)
        hs.append(h)
        cs.append(c)
    return RolloutCarry(obs, hs, cs)


def _collect_one(env, actor: Actor, horizon: int, rng: np.random.Generator,
                 obs: Array, h: Array, c: Array, env_index: int) -> tuple[EnvRollout, tuple]:
    n = env.n_agents
    d = env.obs_dim
    s = actor.state_size
    obs_buf = np.zeros((horizon, n, d))
    if actor.discrete:
        act_buf = np.zeros((horizon, n), dtype=np.int64)
    else:
        act_buf = np.zeros((horizon, n, actor.out_dim))
    rew_buf = np.zeros((horizon, n))
    done_buf = np.zeros(horizon)
    logp_buf = np.zeros((horizon, n))
    h_buf = np.zeros((horizon, n, s))
    c_buf = np.zeros((horizon, n, s))

    for t in range(horizon):
        if not np.isfinite(obs).all():
            raise NumericError(f"environment {env_index}: non-finite observation at step {t}")
        obs_buf[t] = obs
        h_buf[t] = h
        c_buf[t] = c
        out, h, c, _ = actor.step(obs, h, c)
        actions, logp = actor.sample_batch(out, rng)
        act_buf[t] = actions
        logp_buf[t] = logp
        try:
            next_obs, rewards, done = env.step(actions)
        except Exception as exc:  # noqa: BLE001 - annotate with env index and re-raise
            raise RolloutError(f"environment {env_index} failed at step {t}: {exc}") from exc
        rew_buf[t] = rewards
        done_buf[t] = float(done)
        if done:
            try:
                next_obs = env.reset(rng)
            except Exception as exc:  # noqa: BLE001
                raise RolloutError(f"environment {env_index} failed to reset at step {t}: {exc}") from exc
            h, c = actor.state_zeros(n)
        obs = np.stack(next_obs)

    ro = EnvRollout(
        env_index=env_index,
        obs=obs_buf,
        actions=act_buf,
        rewards=rew_buf,
        dones=done_buf,
        log_probs=logp_buf,
        final_obs=obs.copy(),
        actor_h=h_buf,
        actor_c=c_buf,
    )
    return ro, (obs, h, c)


def collect_rollout(envs: Sequence, actor: Actor, horizon: int,
                    rngs: Sequence[np.random.Generator], carry: RolloutCarry,
                    workers: int = 1) -> tuple[list[EnvRollout], RolloutCarry]:
    """Runs every env copy for ``horizon`` steps under the frozen actor.

    Each env owns its RNG stream and its computation is identical whether run
    on the calling thread or a pool, so results merge deterministically in
    env-index order.
    """
    if horizon < 1:
        raise ContractError(f"horizon must be >= 1, got {horizon}")
    if len(envs) != len(rngs):
        raise ContractError("need one rng stream per environment")
    jobs = [
        (env, actor, horizon, rng, carry.obs[k], carry.actor_h[k], carry.actor_c[k], k)
        for k, (env, rng) in enumerate(zip(envs, rngs))
    ]
    if workers > 1 and len(envs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _collect_one(*j), jobs))
    else:
        results = [_collect_one(*j) for j in jobs]
    rollouts = [r for r, _ in results]
    new_carry = RolloutCarry(
        [state[0] for _, state in results],
        [state[1] for _, state in results],
        [state[2] for _, state in results],
    )
    return rollouts, new_carry


# --- interleaved critic sequences -------------------------------------------


@dataclass
class MetaTrajectory:
    """All agents' critic inputs for one window, interleaved per time step."""

    env_index: int
    entries: Array        # (T * N, in_dim)
    final_entries: Array  # (N, in_dim), bootstrap inputs in slot order
    order_map: Array      # (T, N) ints; slot s at step t holds agent order_map[t, s]
    dones: Array          # (T,)
    n_agents: int
    horizon: int
    state_h: Array | None = None  # (T, Hc) critic state entering each step group
    state_c: Array | None = None

    def group_resets(self, include_bootstrap: bool = False) -> Array:
        """Per-entry reset flags: clear state before each new episode's group."""
        t = self.horizon + (1 if include_bootstrap else 0)
        r = np.zeros(t * self.n_agents)
        for step in range(1, self.horizon):
            if self.dones[step - 1]:
                r[step * self.n_agents] = 1.0
        return r

    def interleave(self, per_agent: Array) -> Array:
        """Maps a (T, N) agent-indexed matrix to the flat entry order."""
        if per_agent.shape[:2] != (self.horizon, self.n_agents):
            raise ContractError(
                f"expected ({self.horizon}, {self.n_agents}) leading shape, got {per_agent.shape}")
        rows = np.repeat(np.arange(self.horizon), self.n_agents)
        cols = self.order_map.reshape(-1)
        return per_agent[rows, cols]

    def deinterleave(self, flat: Array) -> Array:
        """Inverse of interleave: flat entries back to (T, N) agent-indexed."""
        if flat.shape[0] != self.horizon * self.n_agents:
            raise ContractError(
                f"expected {self.horizon * self.n_agents} entries, got {flat.shape[0]}")
        out = np.zeros((self.horizon, self.n_agents) + flat.shape[1:], dtype=flat.dtype)
        rows = np.repeat(np.arange(self.horizon), self.n_agents)
        cols = self.order_map.reshape(-1)
        out[rows, cols] = flat
        return out


def critic_inputs(obs: Array, actions: Array, dones: Array,
                  include_prev_action: bool, n_actions: int | None) -> Array:
    """Per-agent critic inputs: observation, optionally the agent's previous
    action (one-hot when discrete, zeros at episode starts)."""
    if not include_prev_action:
        return obs
    T, N = obs.shape[:2]
    if actions.ndim == 2:  # discrete -> one-hot
        if n_actions is None:
            raise ContractError("n_actions required to one-hot discrete previous actions")
        enc = np.zeros((T, N, n_actions))
        rows = np.repeat(np.arange(T), N)
        cols = np.tile(np.arange(N), T)
        enc[rows, cols, actions.reshape(-1)] = 1.0
    else:
        enc = actions.astype(np.float64)
    prev = np.zeros_like(enc)
    prev[1:] = enc[:-1]
    prev[1:] *= (1.0 - dones[:-1])[:, None, None]  # new episode starts blank
    return np.concatenate([obs, prev], axis=2)


def build_meta_trajectory(source, rng: np.random.Generator,
                          include_prev_action: bool = False,
                          n_actions: int | None = None) -> MetaTrajectory:
    """Interleaves one window's per-agent critic inputs into a single sequence.

    ``source`` is an EnvRollout or a sequence of AgentTrajectory sharing one
    horizon. Agent order per slot: identity for one or two agents, one uniform
    permutation per window otherwise.
    """
    if isinstance(source, EnvRollout):
        obs, actions, dones = source.obs, source.actions, source.dones
        final_obs = source.final_obs
        env_index = source.env_index
    else:
        trajs = list(source)
        horizons = {traj.horizon for traj in trajs}
        if len(horizons) != 1:
            raise ContractError(f"trajectories disagree on horizon: {sorted(horizons)}")
        obs = np.stack([traj.obs for traj in trajs], axis=1)
        actions = np.stack([traj.actions for traj in trajs], axis=1)
        dones = trajs[0].dones
        final_obs = None
        env_index = -1

    T, N = obs.shape[:2]
    if N <= 2:
        order = np.arange(N)
    else:
        order = rng.permutation(N)
    order_map = np.tile(order, (T, 1))

    inputs = critic_inputs(obs, actions, dones, include_prev_action, n_actions)
    entries = inputs[:, order].reshape(T * N, -1)
    if final_obs is not None:
        if include_prev_action:
            width = inputs.shape[2] - final_obs.shape[1]
            final_in = np.concatenate([final_obs, np.zeros((N, width))], axis=1)
            # bootstrap entries only matter when the window did not end an
            # episode, so the previous action is the last one taken
            if not dones[-1]:
                if actions.ndim == 2:
                    enc = np.zeros((N, n_actions))
                    enc[np.arange(N), actions[-1]] = 1.0
                else:
                    enc = actions[-1].astype(np.float64)
                final_in[:, final_obs.shape[1]:] = enc
        else:
            final_in = final_obs.astype(np.float64)
        final_entries = final_in[order]
    else:
        final_entries = np.zeros((N, entries.shape[1]))
    return MetaTrajectory(
        env_index=env_index,
        entries=entries,
        final_entries=final_entries,
        order_map=order_map,
        dones=np.asarray(dones, dtype=np.float64),
        n_agents=N,
        horizon=T,
    )


def value_pass(metas: Sequence[MetaTrajectory], critic: Critic,
               rollouts: Sequence[EnvRollout] | None = None) -> list[tuple[Array, Array]]:
    """Evaluates the pre-update critic over interleaved windows.

    All windows run batched in lockstep (they share horizon and agent count).
    Fills each meta's per-group entering states for later chunking; when the
    matching EnvRollouts are given, also writes values (T, N) and terminal
    values (N,) back onto them. Returns [(values, terminal_values)] per window.
    """
    if not metas:
        return []
    T = metas[0].horizon
    N = metas[0].n_agents
    for m in metas:
        if (m.horizon, m.n_agents) != (T, N):
            raise ContractError("windows disagree on horizon or agent count")
    B = len(metas)
    inputs = np.stack([np.concatenate([m.entries, m.final_entries]) for m in metas])
    resets = np.stack([m.group_resets(include_bootstrap=True) for m in metas])
    h0, c0 = critic.state_zeros(B)
    vals, h_hist, c_hist, _ = critic.values_window(inputs, h0, c0, resets)
    out = []
    for k, m in enumerate(metas):
        m.state_h = h_hist[k, : T * N : N].copy()
        m.state_c = c_hist[k, : T * N : N].copy()
        flat = vals[k, : T * N]
        per_agent = m.deinterleave(flat)
        terminal = np.zeros(N)
        order = m.order_map[0]
        terminal[order] = vals[k, T * N :]
        out.append((per_agent, terminal))
        if rollouts is not None:
            ro = rollouts[k]
            ro.values = per_agent
            ro.terminal_values = terminal
            ro.critic_h = m.state_h
            ro.critic_c = m.state_c
    return out


def value_pass_per_agent(rollouts: Sequence[EnvRollout], critic: Critic,
                         include_prev_action: bool = False,
                         n_actions: int | None = None) -> None:
    """Critic evaluation with no cross-agent state flow: one stream per agent.

    Used by the ablations that keep the critic but drop the interleaving.
    Fills values, terminal values, and per-step critic states on the rollouts.
    """
    if not rollouts:
        return
    T = rollouts[0].horizon
    N = rollouts[0].n_agents
    streams = []
    resets = []
    for ro in rollouts:
        inputs = critic_inputs(ro.obs, ro.actions, ro.dones, include_prev_action, n_actions)
        if include_prev_action:
            width = inputs.shape[2] - ro.final_obs.shape[1]
            final_in = np.concatenate([ro.final_obs, np.zeros((N, width))], axis=1)
        else:
            final_in = ro.final_obs
        step_resets = ro.step_resets()
        for i in range(N):
            streams.append(np.concatenate([inputs[:, i], final_in[i : i + 1]]))
            resets.append(np.concatenate([step_resets, [0.0]]))
    inputs = np.stack(streams)
    resets = np.stack(resets)
    h0, c0 = critic.state_zeros(len(streams))
    vals, h_hist, c_hist, _ = critic.values_window(inputs, h0, c0, resets)
    for k, ro in enumerate(rollouts):
        rows = slice(k * N, (k + 1) * N)
        ro.values = vals[rows, :T].T.copy()
        ro.terminal_values = vals[rows, T].copy()
        ro.critic_h = h_hist[rows, :T].transpose(1, 0, 2).copy()  # (T, N, Hc)
        ro.critic_c = c_hist[rows, :T].transpose(1, 0, 2).copy()


# --- chunking ----------------------------------------------------------------


@dataclass
class MetaChunk:
    """A contiguous window slice of an interleaved sequence."""

    env_index: int
    start_step: int
    end_step: int
    entries: Array       # ((end-start) * N, in_dim)
    resets: Array        # same leading length
    initial_state: LstmState

    @property
    def meta_len(self) -> int:
        return self.entries.shape[0]


def chunk_for_training(meta: MetaTrajectory, chunk_len: int) -> list[MetaChunk]:
    """Splits an interleaved window into chunks of ``chunk_len`` env steps.

    The final chunk keeps the remainder. Chunk k starts from the pre-update
    critic state recorded at its first step, so run value_pass first; the
    first chunk starts from zeros.
    """
    if chunk_len < 1:
        raise ContractError(f"chunk_len must be >= 1, got {chunk_len}")
    T, N = meta.horizon, meta.n_agents
    resets = meta.group_resets()
    chunks = []
    for t0 in range(0, T, chunk_len):
        t1 = min(t0 + chunk_len, T)
        if t0 == 0:
            state = LstmState.zeros(meta.state_h.shape[1] if meta.state_h is not None else 0)
        else:
            if meta.state_h is None:
                raise ContractError("run value_pass before chunking past the first window slice")
            state = LstmState(meta.state_h[t0].copy(), meta.state_c[t0].copy())
        sl = slice(t0 * N, t1 * N)
        chunk_resets = resets[sl].copy()
        chunk_resets[0] = 0.0  # the stored state is already post-reset
        chunks.append(MetaChunk(
            env_index=meta.env_index,
            start_step=t0,
            end_step=t1,
            entries=meta.entries[sl],
            resets=chunk_resets,
            initial_state=state,
        ))
    return chunks
