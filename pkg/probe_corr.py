"""Scratch: correlation between learned-critic GAE advantages and the oracle
potential-difference advantage on coopnav, tracked over training.

Oracle signal: per-agent decrease in distance to the landmark centroid,
zeroed at episode boundaries.  If GAE(lam) correlates with it, policy
improvement should follow at that lam.
"""
import numpy as np

from marppo.advantage import gae, multi_agent_deltas, single_agent_gae
from marppo.config import ExperimentConfig
from marppo.envs import make_env
from marppo.rollout import collect_rollout, init_carry
from marppo.trainer import Trainer


def oracle_adv(obs, dones):
    # obs: (T, N, D) with [pos(2), vel(2), rel_agents(4), rel_marks(6)]
    pos = obs[:, :, 0:2]
    cen = pos + obs[:, :, 8:14].reshape(obs.shape[0], obs.shape[1], 3, 2).mean(axis=2)
    d = np.linalg.norm(pos - cen, axis=2)  # (T, N)
    adv = np.zeros_like(d)
    adv[:-1] = d[:-1] - d[1:]
    adv[dones.astype(bool)] = 0.0
    return adv


def corr(a, b, mask):
    a = a[mask].ravel()
    b = b[mask].ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / den) if den > 0 else 0.0


def run(variant, beta, gamma, iters=80, seed=0):
    cfg = ExperimentConfig(
        env="coopnav", variant=variant, n_agents=3, beta=beta, gamma=gamma,
        n_envs=4, iterations=iters, seed=seed,
    ).validate()
    tr = Trainer(cfg)
    print(f"--- {variant} beta={beta} gamma={gamma} lam_train={cfg.lam} ---", flush=True)
    for it in range(1, iters + 1):
        st = tr.train_iteration()
        if it % 20 == 0 or it == 1:
            # fresh probe rollout, then measure advantage correlations
            envs = [make_env("coopnav", 3) for _ in range(4)]
            rngs = [np.random.default_rng((seed, 99, it, e)) for e in range(4)]
            carry = init_carry(envs, tr.actor, rngs)
            ros, _ = collect_rollout(envs, tr.actor, 64, rngs, carry, 1)
            if cfg.variant == "lstm-icf":
                from marppo.rollout import build_meta_trajectory, value_pass
                metas = [build_meta_trajectory(ro, np.random.default_rng((seed, 98, it, e)),
                                               cfg.critic_include_prev_action, 5)
                         for e, ro in enumerate(ros)]
                value_pass(metas, tr.critic, ros)
            else:
                from marppo.rollout import value_pass_per_agent
                value_pass_per_agent(ros, tr.critic, cfg.critic_include_prev_action, 5)
            cs = {}
            for lam in (0.0, 0.3, 0.95):
                gs, os_, ms = [], [], []
                for ro in ros:
                    v_full = np.concatenate([ro.values, ro.terminal_values[None]], axis=0)
                    if cfg.weighted_estimator:
                        a = gae(multi_agent_deltas(ro.rewards, v_full, gamma, beta, ro.dones),
                                gamma, lam, ro.dones)
                    else:
                        a = single_agent_gae(ro.rewards, v_full, gamma, lam, ro.dones)
                    o = oracle_adv(ro.obs, np.repeat(ro.dones[:, None], 3, axis=1))
                    m = ~np.repeat(ro.dones[:, None], 3, axis=1).astype(bool)
                    gs.append(a); os_.append(o); ms.append(m)
                cs[lam] = corr(np.concatenate(gs), np.concatenate(os_), np.concatenate(ms))
            print(f"it {it:3d} ret {st.mean_eval_return:8.2f} closs {st.critic_loss:8.2f} "
                  + " ".join(f"corr[{l}]={c:+.3f}" for l, c in cs.items()), flush=True)


run("lstm-icf", 1.0, 0.9, iters=80)
run("lstm-icf", 1.0, 0.99, iters=80)
run("ff-nic", 0.0, 0.9, iters=80)
