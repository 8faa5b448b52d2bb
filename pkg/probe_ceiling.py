"""Scratch: achievable ceilings for agent-anonymous (parameter-shared) policies."""
import sys
import numpy as np

sys.path.insert(0, "src")
from marppo.envs import make_env

ACC = np.array([[0.0, 0.0], [0.0, 0.5], [0.0, -0.5], [-0.5, 0.0], [0.5, 0.0]])


def greedy_toward(target, pos, vel):
    best, best_d = 0, np.inf
    for a in range(5):
        v2 = 0.5 * vel + ACC[a] * 0.1
        p2 = pos + v2 * 0.1
        d = np.linalg.norm(p2 - target)
        if d < best_d:
            best, best_d = a, d
    return best


def nearest(pos, vel, lms, i):
    d = np.linalg.norm(lms - pos[i], axis=1)
    return greedy_toward(lms[np.argmin(d)], pos[i], vel[i])


def centroid(pos, vel, lms, i):
    return greedy_toward(lms.mean(axis=0), pos[i], vel[i])


def assigned(pos, vel, lms, i):
    return greedy_toward(lms[i], pos[i], vel[i])


def matched(pos, vel, lms, i):
    # greedy global matching by distance, anonymous but consistent across agents
    taken = set()
    order = []
    pairs = sorted((np.linalg.norm(lms[a] - pos[b]), b, a)
                   for a in range(3) for b in range(3))
    got = {}
    for d, agent, lm in pairs:
        if agent in got or lm in taken:
            continue
        got[agent] = lm
        taken.add(lm)
    return greedy_toward(lms[got[i]], pos[i], vel[i])


def run(policy, episodes=2000):
    rng = np.random.default_rng(7)
    totals = []
    for _ in range(episodes):
        env = make_env("coopnav", 3)
        env.reset(rng)
        total, done = 0.0, False
        while not done:
            st = env.get_state()
            acts = [policy(st["pos"], st["vel"], st["landmarks"], i) for i in range(3)]
            _, rew, done = env.step(np.array(acts))
            total += float(rew.sum())
        totals.append(total)
    t = np.array(totals)
    return t.mean(), t.std() / np.sqrt(len(t))


for name, pol in (("assigned", assigned), ("matched", matched),
                  ("nearest", nearest), ("centroid", centroid)):
    m, se = run(pol)
    print(f"{name:9s} {m:8.3f} +- {se:.3f}", flush=True)
