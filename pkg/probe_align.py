"""Scratch: multi-step immediate-reward game to expose any action/advantage
time misalignment that length-1 episodes cannot catch."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.trainer import Trainer, evaluate_policy


class BitMatchGame:
    """10-step, 2-agent game: obs carries a random bit, reward 1 for matching it."""

    episode_len = 10
    n_actions = 2
    discrete = True

    def __init__(self, n_agents: int = 2):
        self.n_agents = 2
        self.obs_dim = 2
        self.t = 0
        self.bits = np.zeros(2, dtype=int)
        self._rng = np.random.default_rng(0)

    def _draw(self):
        self.bits = self._rng.integers(0, 2, size=2)

    def observe(self):
        return [np.array([1.0, 2.0 * self.bits[i] - 1.0]) for i in range(2)]

    def reset(self, rng):
        self._rng = rng
        self.t = 0
        self._draw()
        return self.observe()

    def step(self, actions):
        actions = np.asarray(actions).astype(int)
        rewards = (actions == self.bits).astype(float)
        self.t += 1
        done = self.t >= self.episode_len
        self._draw()
        return self.observe(), rewards, done

    def get_state(self):
        return {"t": np.array([[self.t]]), "bits": self.bits.reshape(1, -1).astype(float)}

    def set_state(self, state):
        self.t = int(state["t"][0, 0])
        self.bits = state["bits"].reshape(-1).astype(int)


def run(variant, iters=60, lr=0.005, seed=0):
    cfg = ExperimentConfig(
        env="diagnostic", n_agents=2, variant=variant, beta=0.0,
        n_envs=4, horizon=40, iterations=iters, lr=lr,
        eval_episodes=64, seed=seed,
    )
    tr = Trainer(cfg, env_factory=lambda: BitMatchGame(2))
    fac = lambda: BitMatchGame(2)
    pre, _ = evaluate_policy(tr.actor, fac, 500, np.random.default_rng(999))
    marks = {}
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 10 == 0 or i == 1:
            marks[i] = round(st.mean_eval_return, 2)
    post, _ = evaluate_policy(tr.actor, fac, 500, np.random.default_rng(999))
    print(f"{variant} lr={lr:g}: pre {pre:6.2f} post {post:6.2f} (optimum 20.0, random 10.0)",
          flush=True)
    print(f"   marks: {marks}", flush=True)


run("ff-nic")
run("lstm-icf", lr=0.005)
