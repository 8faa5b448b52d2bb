"""Train the full recurrent stack on the one-step coordination game.

Two agents each pick 0 (safe: 0.2) or 1 (pays 1.0 only if the other also
picks 1).  Mutual cooperation is worth 2.0 per episode; playing safe on
both sides only 0.4.  With full reward sharing (beta = 1) the shared
advantage pushes both agents onto the cooperative action within a handful
of iterations — watch mean return climb from ~0.9 (random) towards 2.0.

Takes well under a minute.  Run:  python3 demos/train_diagnostic.py
"""

import numpy as np

from marppo.config import ExperimentConfig
from marppo.trainer import Trainer


def main():
    cfg = ExperimentConfig(
        env="diagnostic", variant="lstm-icf", n_agents=2, beta=1.0,
        n_envs=4, horizon=64, iterations=30, seed=1,
        actor_hidden=64, critic_hidden=64, eval_episodes=200,
    ).validate()
    tr = Trainer(cfg)
    print("iter  mean eval return   (2.0 = always cooperate, 0.4 = always safe)")
    for _ in range(cfg.iterations):
        st = tr.train_iteration()
        bar = "#" * int(max(0.0, st.mean_eval_return) * 25)
        print(f"{st.iteration:3d}   {st.mean_eval_return:6.3f}  {bar}")
        if st.mean_eval_return >= 1.95:
            print("cooperation locked in; stopping early")
            break


if __name__ == "__main__":
    main()
