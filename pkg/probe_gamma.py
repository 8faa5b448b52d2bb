"""Scratch: does a shorter value horizon unlock coopnav learning at desk scale?"""
import sys
import time
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy


def run(variant, beta, gamma, lr, n_envs=8, iters=100, seed=0):
    cfg = ExperimentConfig(
        env="coopnav", n_agents=3, variant=variant, beta=beta,
        n_envs=n_envs, horizon=100, iterations=iters, lr=lr, gamma=gamma,
        eval_episodes=100, seed=seed,
    )
    tr = Trainer(cfg)
    fac = lambda: make_env("coopnav", 3)
    pre, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    t0 = time.perf_counter()
    marks = {}
    closs = {}
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 20 == 0 or i == 1:
            marks[i] = round(st.mean_eval_return, 1)
            closs[i] = round(st.critic_loss, 1)
    dt = time.perf_counter() - t0
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"{variant} b={beta:g} g={gamma:g} lr={lr:g} E={n_envs}: "
          f"pre {pre:7.2f} post {post:7.2f} gain {post - pre:+6.2f} ({dt:5.0f}s)", flush=True)
    print(f"   ret marks: {marks}", flush=True)
    print(f"   closs    : {closs}", flush=True)


run("ff-nic", 0.0, 0.9, 0.005)
run("ff-nic", 0.0, 0.99, 0.005)
run("lstm-icf", 1.0, 0.9, 0.005)
run("lstm-icf", 1.0, 0.9, 0.001)
