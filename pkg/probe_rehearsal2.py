"""Scratch: mini-rehearsal of the candidate criterion-6 gate config.

gamma 0.9, lam 0.0, E=4, horizon 100, 300 iterations; 3 arms x 3 seeds.
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

finals = {}
for name, variant, beta in ARMS:
    finals[name] = []
    for seed in (0, 1, 2):
        t0 = time.time()
        cfg = ExperimentConfig(
            env="coopnav", variant=variant, n_agents=3, beta=beta,
            gamma=0.9, lam=0.0, n_envs=4, horizon=100, iterations=300, seed=seed,
        ).validate()
        tr = Trainer(cfg)
        for _ in range(cfg.iterations):
            st = tr.train_iteration()
        post, _ = evaluate_policy(tr.actor, lambda: make_env("coopnav", 3), 1000,
                                  np.random.default_rng((seed, 6)))
        finals[name].append(post)
        print(f"{name:<12} seed {seed}: post1000 {post:8.2f}  ent-last {st.entropy:.3f}"
              f"  [{time.time()-t0:.0f}s]", flush=True)

print()
for name, vals in finals.items():
    v = np.array(vals)
    print(f"{name:<12} mean {v.mean():8.2f}  sd {v.std(ddof=1):.2f}")
m = {k: np.mean(v) for k, v in finals.items()}
s = {k: np.std(v, ddof=1) for k, v in finals.items()}
for other in ("lstm-icf-b0", "ff-nic"):
    se = np.sqrt(s["lstm-icf-b1"] ** 2 / 3 + s[other] ** 2 / 3)
    print(f"b1 - {other}: {m['lstm-icf-b1'] - m[other]:+.2f}  (0.5*SE_diff = {0.5 * se:.2f})")
