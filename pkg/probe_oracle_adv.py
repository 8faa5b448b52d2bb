"""Scratch: drive the actor update with oracle shaped advantages to isolate
the actor path from advantage-estimation noise."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy


class OracleAdvTrainer(Trainer):
    def _prepare(self, rollouts, metas):
        data = super()._prepare(rollouts, metas)
        for e, ro in enumerate(rollouts):
            obs = ro.obs  # (T, N, 14)
            T, N = obs.shape[:2]
            pos = obs[:, :, 0:2]
            cen = pos + obs[:, :, 8:14].reshape(T, N, 3, 2).mean(axis=2)
            d = np.linalg.norm(pos - cen, axis=2)
            adv = np.zeros((T, N))
            adv[:-1] = d[:-1] - d[1:]
            adv[ro.dones.astype(bool), :] = 0.0
            data.advantages[e][:] = adv
        flat = np.concatenate([a.reshape(-1) for a in data.advantages])
        m, s = flat.mean(), flat.std() + 1e-8
        for a in data.advantages:
            a[:] = (a - m) / s
        return data


def run(variant, iters=40, lr=0.005):
    cfg = ExperimentConfig(
        env="coopnav", n_agents=3, variant=variant, beta=0.0,
        n_envs=8, horizon=100, iterations=iters, lr=lr, gamma=0.9,
        eval_episodes=100, seed=0,
    )
    tr = OracleAdvTrainer(cfg)
    fac = lambda: make_env("coopnav", 3)
    pre, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    marks = {}
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 10 == 0 or i == 1:
            marks[i] = round(st.mean_eval_return, 1)
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"{variant} oracle-adv: pre {pre:7.2f} post {post:7.2f} gain {post - pre:+6.2f}",
          flush=True)
    print(f"   marks: {marks}", flush=True)


run("ff-nic")
