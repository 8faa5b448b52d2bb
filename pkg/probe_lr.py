"""Scratch: lr sweep on coopnav with entropy/clip diagnostics."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy


def run(lr, horizon, iters=80, seed=0):
    cfg = ExperimentConfig(
        env="coopnav", n_agents=3, variant="lstm-icf", beta=1.0,
        n_envs=4, horizon=horizon, iterations=iters, lr=lr,
        eval_episodes=100, seed=seed,
    )
    tr = Trainer(cfg)
    rng = np.random.default_rng(12345)
    fac = lambda: make_env("coopnav", 3)
    pre, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"lr={lr:g} T={horizon} seed={seed}  pre-train eval(1000ep): {pre:8.2f}", flush=True)
    for i in range(1, iters + 1):
        st = tr.train_iteration()
        if i % 10 == 0 or i == 1:
            print(f"  it {i:3d}  ret {st.mean_eval_return:8.2f}  ent {st.entropy:6.4f}"
                  f"  clip {st.clip_fraction:6.4f}  aloss {st.actor_loss:8.4f}"
                  f"  closs {st.critic_loss:8.3f}", flush=True)
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng(999))
    print(f"  post-train eval(1000ep): {post:8.2f}   gain {post - pre:+.2f}", flush=True)
    return post - pre


for lr in (0.005, 0.001, 3e-4):
    run(lr, horizon=100)
