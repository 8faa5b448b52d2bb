"""Scratch: headroom measurement — expert vs no-op vs random on coopnav."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.envs import make_env

ACC = np.array([[0.0, 0.0], [0.0, 0.5], [0.0, -0.5], [-0.5, 0.0], [0.5, 0.0]])


def episode_return(policy, rng):
    env = make_env("coopnav", 3)
    obs = env.reset(rng)
    total = 0.0
    done = False
    while not done:
        state = env.get_state()
        pos, vel, lms = state["pos"], state["vel"], state["landmarks"]
        acts = policy(pos, vel, lms, rng)
        obs, rew, done = env.step(acts)
        total += float(np.sum(rew))
    return total


def expert(pos, vel, lms, rng):
    acts = []
    for i in range(3):
        best, best_d = 0, np.inf
        for a in range(5):
            v2 = 0.5 * vel[i] + ACC[a] * 0.1
            p2 = pos[i] + v2 * 0.1
            d = np.linalg.norm(p2 - lms[i])
            if d < best_d:
                best, best_d = a, d
        acts.append(best)
    return np.array(acts)


def noop(pos, vel, lms, rng):
    return np.zeros(3, dtype=int)


def random_pol(pos, vel, lms, rng):
    return rng.integers(0, 5, size=3)


for name, pol in (("expert", expert), ("noop", noop), ("random", random_pol)):
    rng = np.random.default_rng(7)
    rets = [episode_return(pol, rng) for _ in range(2000)]
    rets = np.array(rets)
    print(f"{name:8s} mean {rets.mean():8.3f}  std {rets.std():6.2f}  "
          f"se {rets.std()/np.sqrt(len(rets)):5.3f}", flush=True)
