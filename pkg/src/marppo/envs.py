"""Two small cooperative environments used for training and testing.

Both expose the same surface: ``reset(rng) -> [obs]``, ``step(actions) ->
([obs], rewards, done)``, a fixed ``episode_len``, and ``get_state`` /
``set_state`` for deterministic checkpoint resume. Rewards come back as a
float64 vector, one entry per agent; ``done`` is shared by every agent.
"""

from __future__ import annotations

import numpy as np

from marppo.nn import ContractError

Array = np.ndarray


class CooperativeNavigation:
    """N agents spread across N landmarks on a 2-D plane.

    Agent i is paired with landmark i and is rewarded the negative euclidean
    distance to it, minus one penalty point per other agent closer than the
    collision radius. Discrete actions accelerate along an axis; velocity is
    damped by half each step. Episodes run exactly 25 steps.
    """

    ACCEL = 0.5
    DT = 0.1
    DAMPING = 0.5
    COLLISION_RADIUS = 0.15
    # no-op, up, down, left, right
    ACTION_AXES = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0]])

    episode_len = 25
    n_actions = 5
    discrete = True

    def __init__(self, n_agents: int = 3):
        if n_agents < 1:
            raise ContractError(f"need at least one agent, got {n_agents}")
        self.n_agents = n_agents
        self.obs_dim = 4 + 2 * (n_agents - 1) + 2 * n_agents
        self.pos = np.zeros((n_agents, 2))
        self.vel = np.zeros((n_agents, 2))
        self.landmarks = np.zeros((n_agents, 2))
        self.t = 0

    def reset(self, rng: np.random.Generator) -> list[Array]:
        self.pos = rng.uniform(-1.0, 1.0, size=(self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.landmarks = rng.uniform(-1.0, 1.0, size=(self.n_agents, 2))
        self.t = 0
        return self.observe()

    def observe(self) -> list[Array]:
        """Own position, own velocity, others relative to self, landmarks relative to self."""
        obs = []
        for i in range(self.n_agents):
            rel_agents = np.delete(self.pos - self.pos[i], i, axis=0)
            rel_marks = self.landmarks - self.pos[i]
            obs.append(np.concatenate([self.pos[i], self.vel[i], rel_agents.ravel(), rel_marks.ravel()]))
        return obs

    def step(self, actions) -> tuple[list[Array], Array, bool]:
        actions = np.asarray(actions)
        if actions.shape != (self.n_agents,):
            raise ContractError(f"expected {self.n_agents} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() >= self.n_actions:
            raise ContractError(f"action out of range [0, {self.n_actions}): {actions}")
        accel = self.ACTION_AXES[actions.astype(int)] * self.ACCEL
        self.vel = self.DAMPING * self.vel + accel * self.DT
        self.pos = self.pos + self.vel * self.DT
        self.t += 1

        dists = np.linalg.norm(self.pos - self.landmarks, axis=1)
        diffs = self.pos[:, None, :] - self.pos[None, :, :]
        pair = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(pair, np.inf)
        collisions = (pair < self.COLLISION_RADIUS).sum(axis=1)
        rewards = -dists - collisions.astype(np.float64)

        done = self.t >= self.episode_len
        return self.observe(), rewards, done

    def get_state(self) -> dict[str, Array]:
        return {
            "pos": self.pos.copy(),
            "vel": self.vel.copy(),
            "landmarks": self.landmarks.copy(),
            "t": np.array([[float(self.t)]]),
        }

    def set_state(self, state: dict[str, Array]) -> None:
        self.pos = np.asarray(state["pos"], dtype=np.float64).reshape(self.n_agents, 2).copy()
        self.vel = np.asarray(state["vel"], dtype=np.float64).reshape(self.n_agents, 2).copy()
        self.landmarks = np.asarray(state["landmarks"], dtype=np.float64).reshape(self.n_agents, 2).copy()
        self.t = int(np.asarray(state["t"]).reshape(-1)[0])


class DiagnosticGame:
    """One-step, two-agent coordination game for pipeline shakeout.

    Payoff per agent: both play 1 -> 1.0 each; playing 0 -> 0.2 regardless of
    the other; playing 1 while the other plays 0 -> 0.0. Optimal joint return
    is 2.0; uniform play yields an expected total of 0.7.
    """

    episode_len = 1
    n_actions = 2
    discrete = True

    def __init__(self, n_agents: int = 2):
        if n_agents != 2:
            raise ContractError("the diagnostic game is defined for exactly two agents")
        self.n_agents = 2
        self.obs_dim = 2
        self.t = 0

    def reset(self, rng: np.random.Generator) -> list[Array]:
        self.t = 0
        return self.observe()

    def observe(self) -> list[Array]:
        # constant observation plus an agent tag; the game is symmetric
        return [np.array([1.0, -1.0]), np.array([1.0, 1.0])]

    def step(self, actions) -> tuple[list[Array], Array, bool]:
        actions = np.asarray(actions).astype(int)
        if actions.shape != (2,):
            raise ContractError(f"expected 2 actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() > 1:
            raise ContractError(f"binary actions required: {actions}")
        rewards = np.zeros(2)
        for i in range(2):
            other = actions[1 - i]
            if actions[i] == 0:
                rewards[i] = 0.2
            elif other == 1:
                rewards[i] = 1.0
            else:
                rewards[i] = 0.0
        self.t += 1
        return self.observe(), rewards, True

    def get_state(self) -> dict[str, Array]:
        return {"t": np.array([[float(self.t)]])}

    def set_state(self, state: dict[str, Array]) -> None:
        self.t = int(np.asarray(state["t"]).reshape(-1)[0])


class ContinuousDiagnosticGame:
    """Gaussian-head wrapper of the diagnostic game.

    Each agent emits one real number; it is clamped to [-1, 1] here at the
    environment boundary and reads as action 1 when >= 0.5.
    """

    episode_len = 1
    discrete = False
    action_dim = 1

    def __init__(self, n_agents: int = 2):
        self.inner = DiagnosticGame(n_agents)
        self.n_agents = self.inner.n_agents
        self.obs_dim = self.inner.obs_dim

    def reset(self, rng: np.random.Generator) -> list[Array]:
        return self.inner.reset(rng)

    def observe(self) -> list[Array]:
        return self.inner.observe()

    def step(self, actions) -> tuple[list[Array], Array, bool]:
        a = np.asarray(actions, dtype=np.float64).reshape(self.n_agents, self.action_dim)
        clamped = np.clip(a, -1.0, 1.0)
        binary = (clamped[:, 0] >= 0.5).astype(int)
        return self.inner.step(binary)

    def get_state(self) -> dict[str, Array]:
        return self.inner.get_state()

    def set_state(self, state: dict[str, Array]) -> None:
        self.inner.set_state(state)


ENV_NAMES = ("coopnav", "diagnostic")


def make_env(name: str, n_agents: int = 3):
    """Builds an environment by its CLI name."""
    if name == "coopnav":
        return CooperativeNavigation(n_agents)
    if name == "diagnostic":
        return DiagnosticGame(2)
    raise ContractError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
