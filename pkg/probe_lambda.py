"""Scratch: low-lambda GAE should recover the potential-difference signal."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy


def run(variant, beta, gamma, lam, lr=0.005, iters=60, seed=0):
    cfg = ExperimentConfig(
        env="coopnav", n_agents=3, variant=variant, beta=beta,
        n_envs=8, horizon=100, iterations=iters, lr=lr, gamma=gamma, lam=lam,
        eval_episodes=100, seed=seed,
    )
    tr = Trainer(cfg)
    fac = lambda: make_env("coopnav", 3)
    pre, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    marks = {}
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 10 == 0 or i == 1:
            marks[i] = round(st.mean_eval_return, 1)
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"{variant} b={beta:g} g={gamma:g} lam={lam:g}: pre {pre:7.2f} "
          f"post {post:7.2f} gain {post - pre:+6.2f}", flush=True)
    print(f"   marks: {marks}", flush=True)


run("ff-nic", 0.0, 0.99, 0.0)
run("ff-nic", 0.0, 0.9, 0.0)
run("ff-nic", 0.0, 0.9, 0.3)
run("lstm-icf", 1.0, 0.9, 0.0)
run("lstm-icf", 1.0, 0.9, 0.3)
