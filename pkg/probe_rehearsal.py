"""Scratch: criterion-6 dress rehearsal at reference hyperparameters.

3 arms x 2 seeds x 300 iterations, horizon 64, E=4.  Reports the final
1000-episode evaluation plus the mean of the last 50 training evals.
"""
import time

import numpy as np

from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.trainer import Trainer, evaluate_policy

ARMS = (
    ("lstm-icf-b1", "lstm-icf", 1.0),
    ("lstm-icf-b0", "lstm-icf", 0.0),
    ("ff-nic", "ff-nic", 0.0),
)


def run(name, variant, beta, seed, iters=300):
    t0 = time.time()
    cfg = ExperimentConfig(
        env="coopnav", variant=variant, n_agents=3, beta=beta,
        n_envs=4, horizon=64, iterations=iters, seed=seed,
    ).validate()
    tr = Trainer(cfg)
    rets = []
    for _ in range(iters):
        st = tr.train_iteration()
        rets.append(st.mean_eval_return)
    fac = lambda: make_env("coopnav", 3)
    post, _ = evaluate_policy(tr.actor, fac, 1000, np.random.default_rng((seed, 7)))
    tail = float(np.mean(rets[-50:]))
    print(f"{name:<12} seed {seed}: post1000 {post:8.2f}  tail50 {tail:8.2f}  "
          f"ent-last {st.entropy:.3f}  [{time.time()-t0:.0f}s]", flush=True)
    return post, tail


for name, variant, beta in ARMS:
    for seed in (0, 1):
        run(name, variant, beta, seed)
