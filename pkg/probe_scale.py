"""Scratch: does coopnav learning emerge with more envs per iteration?"""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy


def run(variant, beta, n_envs, lr, iters, seed=0, horizon=100, batch=None, tag=""):
    cfg = ExperimentConfig(
        env="coopnav", n_agents=3, variant=variant, beta=beta,
        n_envs=n_envs, horizon=horizon, iterations=iters, lr=lr,
        batch_size=batch if batch else 1500, eval_episodes=100, seed=seed,
    )
    tr = Trainer(cfg)
    fac = lambda: make_env("coopnav", 3)
    pre, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    import time
    t0 = time.perf_counter()
    marks = {}
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 10 == 0 or i == 1:
            marks[i] = round(st.mean_eval_return, 1)
    dt = time.perf_counter() - t0
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"{tag or variant} E={n_envs} lr={lr:g} T={horizon}: pre {pre:7.2f} "
          f"post {post:7.2f} gain {post - pre:+6.2f}  ({dt:6.1f}s, {dt/iters:.2f}s/it)",
          flush=True)
    print(f"   marks: {marks}", flush=True)


run("ff-nic", 0.0, 16, 0.005, 60)
run("ff-nic", 0.0, 32, 0.005, 60)
run("ff-nic", 0.0, 32, 0.001, 60)
run("ff-nic", 0.0, 32, 0.005, 60, batch=4800, tag="ff-nic-bigbatch")
