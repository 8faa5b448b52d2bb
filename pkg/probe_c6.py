import time
import numpy as np
from marppo.config import ExperimentConfig
from marppo.trainer import Trainer

arms = [("lstm-icf", 1.0), ("lstm-icf", 0.0), ("ff-nic", 0.0)]
for variant, beta in arms:
    for seed in (0, 1):
        cfg = ExperimentConfig(
            env="coopnav", n_agents=3, variant=variant, beta=beta,
            n_envs=4, horizon=100, epochs=10, batch_size=1500, chunk_len=3,
            actor_hidden=128, critic_hidden=128, lr=0.005, eval_episodes=100,
            seed=seed,
        ).validate()
        tr = Trainer(cfg)
        t0 = time.perf_counter()
        rets = []
        for _ in range(300):
            rets.append(tr.train_iteration().mean_eval_return)
        last20 = float(np.mean(rets[-20:]))
        print(f"{variant} beta={beta} seed={seed}: final={rets[-1]:8.2f} "
              f"last20={last20:8.2f} best={max(rets):8.2f} "
              f"({time.perf_counter()-t0:6.1f}s)", flush=True)
        marks = {1: rets[0], 50: rets[49], 100: rets[99], 200: rets[199], 300: rets[299]}
        print("   trajectory:", {k: round(v, 1) for k, v in marks.items()}, flush=True)
