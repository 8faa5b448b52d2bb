import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import actor_minibatch_grads, actor_minibatch_loss, fd_grad, rel_err

from marppo.config import VARIANTS, ExperimentConfig, parse_config
from marppo.envs import ContinuousDiagnosticGame
from marppo.nn import ContractError
from marppo.policy import Actor
from marppo.rollout import build_meta_trajectory, collect_rollout, value_pass
from marppo.trainer import (
    RATIO_EXP_CLAMP,
    Trainer,
    TrainStats,
    actor_loss,
    actor_loss_grads,
    clipped_surrogate,
    critic_loss,
    critic_loss_grads,
    evaluate_policy,
    prob_ratio,
)


def zero_clock() -> float:
    return 0.0


def small_cfg(**kw) -> ExperimentConfig:
    base = dict(env="diagnostic", n_agents=2, n_envs=2, horizon=8, iterations=3,
                variant="lstm-icf", beta=1.0, epochs=2, batch_size=24, chunk_len=3,
                actor_hidden=8, critic_hidden=8, eval_episodes=16, lr=1e-3)
    base.update(kw)
    return ExperimentConfig(**base).validate()


# --- config ---------------------------------------------------------------


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# a comment line\n"
        "env = coopnav\n"
        "n_agents = 3   # trailing comment\n"
        "beta=0.5\n"
        "\n"
        "normalize_advantages = false\n"
    )
    cfg = parse_config(str(path), overrides={"beta": "0.25", "seed": 7})
    assert cfg.env == "coopnav"
    assert cfg.n_agents == 3
    assert cfg.beta == 0.25  # override wins over the file
    assert cfg.seed == 7
    assert cfg.normalize_advantages is False


@pytest.mark.parametrize("line,key", [
    ("bogus_key = 1", "bogus_key"),
    ("beta = maybe", "beta"),
    ("gamma = 1.5", "gamma"),
    ("n_envs = 0", "n_envs"),
    ("variant = lstm-everything", "variant"),
])
def test_config_rejects_bad_values(tmp_path, line, key):
    path = tmp_path / "bad.cfg"
    path.write_text(line + "\n")
    with pytest.raises(ContractError, match=key):
        parse_config(str(path))


def test_config_diagnostic_forces_two_agents():
    with pytest.raises(ContractError, match="n_agents"):
        ExperimentConfig(env="diagnostic", n_agents=3).validate()


def test_variant_structure_flags():
    flags = {v: (ExperimentConfig(variant=v).recurrent,
                 ExperimentConfig(variant=v).weighted_estimator,
                 ExperimentConfig(variant=v).interleaved_critic)
             for v in VARIANTS}
    assert flags == {
        "ff-nic": (False, False, False),
        "ff-ica": (False, True, False),
        "lstm-nic": (True, False, False),
        "lstm-ica": (True, True, False),
        "lstm-icf": (True, True, True),
    }


def test_minibatch_arithmetic():
    cfg = ExperimentConfig(batch_size=1500, chunk_len=3, n_agents=3)
    assert cfg.chunks_per_batch() == 166
    assert cfg.num_minibatches(136) == 1
    assert cfg.num_minibatches(167) == 2
    tiny = ExperimentConfig(batch_size=1, chunk_len=3, n_agents=3)
    assert tiny.chunks_per_batch() == 1


# --- losses ---------------------------------------------------------------


def test_prob_ratio_values_and_clamp():
    new = np.array([0.0, np.log(2.0), 50.0, -50.0])
    old = np.zeros(4)
    r = prob_ratio(new, old)
    assert r[0] == 1.0
    assert abs(r[1] - 2.0) < 1e-12
    assert r[2] == np.exp(RATIO_EXP_CLAMP)
    assert r[3] == np.exp(-RATIO_EXP_CLAMP)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.5))
def test_clipped_surrogate_is_pessimistic(seed, eps):
    rng = np.random.default_rng(seed)
    ratios = np.exp(rng.normal(0.0, 0.6, size=32))
    adv = rng.normal(0.0, 2.0, size=32)
    surr = clipped_surrogate(ratios, adv, eps)
    assert np.all(surr <= ratios * adv + 1e-12)
    assert np.all(surr <= np.clip(ratios, 1 - eps, 1 + eps) * adv + 1e-12)
    inside = np.abs(ratios - 1.0) <= eps
    np.testing.assert_allclose(surr[inside], (ratios * adv)[inside], rtol=1e-12)


def test_actor_loss_composition():
    rng = np.random.default_rng(3)
    new, old = rng.normal(size=16), rng.normal(size=16)
    adv, ent = rng.normal(size=16), rng.uniform(0.1, 1.0, size=16)
    got = actor_loss(new, old, adv, ent, 0.2, 0.01)
    surr = clipped_surrogate(prob_ratio(new, old), adv, 0.2)
    assert abs(got - (-surr.mean() - 0.01 * ent.mean())) < 1e-15


def test_actor_loss_grads_match_finite_differences():
    rng = np.random.default_rng(11)
    eps = 0.25
    old = rng.normal(0.0, 1.0, size=64)
    new = old + rng.uniform(-0.4, 0.4, size=64)
    ratios = np.exp(new - old)
    # keep every sample a safe distance from the clip kinks
    keep = np.minimum(np.abs(ratios - (1 - eps)), np.abs(ratios - (1 + eps))) > 1e-2
    new, old = new[keep], old[keep]
    adv = rng.normal(0.0, 2.0, size=new.size)
    ent = rng.uniform(0.1, 1.0, size=new.size)
    loss, dlogp, dent, _, _ = actor_loss_grads(new, old, adv, ent, eps, 0.01)
    fd = fd_grad(lambda: actor_loss(new, old, adv, ent, eps, 0.01), new)
    assert rel_err(dlogp, fd) < 1e-6
    np.testing.assert_allclose(dent, np.full(new.size, -0.01 / new.size), rtol=1e-15)
    assert loss == actor_loss(new, old, adv, ent, eps, 0.01)


def test_tie_at_ratio_one_takes_unclipped_branch():
    # at new == old the surrogate gradient is exactly the policy-gradient one
    rng = np.random.default_rng(5)
    lp = rng.normal(size=32)
    adv = rng.normal(size=32)
    _, dlogp, _, _, ratios = actor_loss_grads(lp, lp.copy(), adv, np.ones(32), 0.2, 0.0)
    assert np.all(ratios == 1.0)
    np.testing.assert_array_equal(dlogp, -adv / 32)


def test_critic_loss_grads_match_finite_differences():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(4, 5))
    t = rng.normal(size=(4, 5))
    loss, dv = critic_loss_grads(v, t)
    assert abs(loss - critic_loss(v, t)) < 1e-15
    fd = fd_grad(lambda: critic_loss_grads(v, t)[0], v)
    assert rel_err(dv, fd) < 1e-8


@pytest.mark.parametrize("recurrent", [True, False])
@pytest.mark.parametrize("head", ["discrete", "gaussian"])
def test_full_actor_loss_matches_finite_differences(recurrent, head):
    rng = np.random.default_rng(17)
    if head == "discrete":
        actor = Actor(3, 6, recurrent, rng, n_actions=4)
        actions = rng.integers(0, 4, size=(3, 4))
    else:
        actor = Actor(3, 6, recurrent, rng, action_dim=2)
        actor.log_std.weights[:] = rng.uniform(-0.5, 0.5, size=(1, 2))
        actions = rng.normal(0.0, 1.0, size=(3, 4, 2))
    obs = rng.normal(0.0, 1.0, size=(3, 4, 3))
    h0 = rng.normal(0.0, 0.3, size=(3, actor.state_size))
    c0 = rng.normal(0.0, 0.3, size=(3, actor.state_size))
    resets = np.zeros((3, 4))
    resets[1, 2] = 1.0
    adv = rng.normal(0.0, 1.5, size=12)
    # old log-probs a small step from the replayed ones: ratios stay well
    # inside the clip band, away from its kinks
    lp0 = actor_minibatch_loss(actor, obs, h0, c0, resets, actions, np.zeros(12), adv, 0.2, 0.0)
    assert np.isfinite(lp0)
    outs, _, _, _ = actor.run_window(obs, h0, c0, resets)
    if head == "discrete":
        from marppo.policy import categorical_logp_entropy
        lp, _, _ = categorical_logp_entropy(outs.reshape(12, -1), actions.reshape(12))
    else:
        from marppo.policy import gaussian_logp
        lp = gaussian_logp(outs.reshape(12, -1), actor.log_std_vector(), actions.reshape(12, -1))
    old = lp + rng.uniform(-0.05, 0.05, size=12)

    loss = actor_minibatch_grads(actor, obs, h0, c0, resets, actions, old, adv, 0.2, 0.01)
    assert np.isfinite(loss)
    for blk in actor.blocks:
        analytic = blk.grads.copy()
        fd = fd_grad(
            lambda: actor_minibatch_loss(actor, obs, h0, c0, resets, actions, old, adv, 0.2, 0.01),
            blk.weights)
        assert rel_err(analytic, fd, floor=1e-5) < 1e-3, blk.name


# --- evaluation -----------------------------------------------------------


def test_evaluate_uniform_play_matches_expected_value():
    rng = np.random.default_rng(0)
    actor = Actor(2, 8, True, rng, n_actions=2)
    for blk in actor.blocks:
        blk.weights[:] = 0.0  # zero net -> uniform logits
    mean, std = evaluate_policy(actor, lambda: __import__("marppo.envs", fromlist=["DiagnosticGame"]).DiagnosticGame(2),
                                4096, np.random.default_rng(123))
    assert abs(mean - 0.7) < 0.04  # exact expectation 0.7, ~3.4 standard errors
    assert 0.70 < std < 0.81  # population std is sqrt(0.57) ~ 0.755


def test_evaluate_forced_optimal_is_exact():
    from marppo.envs import DiagnosticGame
    rng = np.random.default_rng(0)
    actor = Actor(2, 8, True, rng, n_actions=2)
    for blk in actor.blocks:
        blk.weights[:] = 0.0
    actor.head.b.weights[:] = np.array([[-50.0, 50.0]])  # always picks action 1
    mean, std = evaluate_policy(actor, lambda: DiagnosticGame(2), 64, np.random.default_rng(9))
    assert mean == 2.0
    assert std == 0.0


# --- trainer behavior -------------------------------------------------------


def test_train_stats_row_matches_fields():
    stats = TrainStats(3, 1.0, 0.5, -0.1, 0.2, 0.6, 0.05, 1.5)
    assert stats.row() == [3, 1.0, 0.5, -0.1, 0.2, 0.6, 0.05, 1.5]
    assert TrainStats.CSV_FIELDS[0] == "iteration"
    assert len(TrainStats.CSV_FIELDS) == len(dataclasses.fields(TrainStats))


@pytest.mark.parametrize("variant", VARIANTS)
def test_one_iteration_runs_for_every_variant(variant):
    tr = Trainer(small_cfg(variant=variant), clock=zero_clock)
    stats = tr.train_iteration()
    assert stats.iteration == 1
    for f in TrainStats.CSV_FIELDS:
        assert np.isfinite(getattr(stats, f))
    assert stats.wall_time_s == 0.0


def test_nic_variant_never_reads_beta():
    runs = []
    for beta in (0.0, 0.9):
        tr = Trainer(small_cfg(variant="lstm-nic", beta=beta), clock=zero_clock)
        stats = [tr.train_iteration() for _ in range(2)]
        runs.append((stats, tr.state_tensors()))
    assert runs[0][0] == runs[1][0]
    for name in runs[0][1]:
        np.testing.assert_array_equal(runs[0][1][name], runs[1][1][name])


def test_same_seed_same_results_and_threaded_matches_serial():
    a = Trainer(small_cfg(rollout_workers=1), clock=zero_clock)
    b = Trainer(small_cfg(rollout_workers=3), clock=zero_clock)
    stats_a = [a.train_iteration() for _ in range(2)]
    stats_b = [b.train_iteration() for _ in range(2)]
    assert stats_a == stats_b
    ta, tb = a.state_tensors(), b.state_tensors()
    assert ta.keys() == tb.keys()
    for name in ta:
        np.testing.assert_array_equal(ta[name], tb[name])


def test_pre_update_ratio_guard_trips_on_tampered_log_probs(monkeypatch):
    import marppo.trainer as trainer_mod
    real = trainer_mod.collect_rollout

    def tampered(*args, **kw):
        rollouts, carry = real(*args, **kw)
        for ro in rollouts:
            ro.log_probs = ro.log_probs + 1e-3
        return rollouts, carry

    monkeypatch.setattr(trainer_mod, "collect_rollout", tampered)
    tr = Trainer(small_cfg(), clock=zero_clock)
    with pytest.raises(AssertionError, match="ratios"):
        tr.train_iteration()


def test_actor_and_critic_updates_stay_separate():
    tr = Trainer(small_cfg(), clock=zero_clock)
    cfg = tr.config
    rngs = [tr._rng(2, 1, k) for k in range(cfg.n_envs)]
    rollouts, tr.carry = collect_rollout(tr.envs, tr.actor, cfg.horizon, rngs, tr.carry)
    metas = [build_meta_trajectory(ro, tr._rng(3, 1)) for ro in rollouts]
    value_pass(metas, tr.critic, rollouts)
    data = tr._prepare(rollouts, metas)
    picks = [(0, 0, 3), (1, 3, 6)]

    actor_before = [blk.weights.copy() for blk in tr.actor.blocks]
    tr._critic_update(data, picks, 1, 0, 0)
    for blk, before in zip(tr.actor.blocks, actor_before):
        np.testing.assert_array_equal(blk.weights, before)

    critic_before = [blk.weights.copy() for blk in tr.critic.blocks]
    tr._actor_update(data, picks, 1, 0, 0)
    for blk, before in zip(tr.critic.blocks, critic_before):
        np.testing.assert_array_equal(blk.weights, before)
    assert any(not np.array_equal(blk.weights, before)
               for blk, before in zip(tr.actor.blocks, actor_before))


@pytest.mark.parametrize("variant", ["lstm-icf", "lstm-ica", "ff-nic"])
def test_checkpoint_resume_is_bitwise(tmp_path, variant):
    path = str(tmp_path / "ck.txt")
    a = Trainer(small_cfg(variant=variant), clock=zero_clock)
    for _ in range(2):
        a.train_iteration()
    a.save_checkpoint(path)
    next_a = a.train_iteration()

    b = Trainer(small_cfg(variant=variant), clock=zero_clock)
    b.load_checkpoint(path)
    assert b.iteration == 2
    next_b = b.train_iteration()
    assert next_a == next_b
    ta, tb = a.state_tensors(), b.state_tensors()
    for name in ta:
        np.testing.assert_array_equal(ta[name], tb[name])


def test_gaussian_policy_trains_end_to_end():
    cfg = small_cfg(variant="lstm-icf", horizon=6, eval_episodes=8)
    tr = Trainer(cfg, clock=zero_clock, env_factory=lambda: ContinuousDiagnosticGame(2))
    assert not tr.actor.discrete
    for _ in range(2):
        stats = tr.train_iteration()
    for f in TrainStats.CSV_FIELDS:
        assert np.isfinite(getattr(stats, f))
    assert np.all(tr.actor.log_std.weights >= -5.0)
    assert np.all(tr.actor.log_std.weights <= 2.0)


def test_training_improves_diagnostic_returns():
    cfg = ExperimentConfig(
        env="diagnostic", n_agents=2, variant="lstm-icf", beta=1.0,
        n_envs=4, horizon=32, epochs=4, batch_size=1500, chunk_len=3,
        actor_hidden=16, critic_hidden=16, lr=0.005, eval_episodes=128, seed=1,
    ).validate()
    tr = Trainer(cfg, clock=zero_clock)
    returns = [tr.train_iteration().mean_eval_return for _ in range(30)]
    # uniform play scores 0.7 on average; the optimum is 2.0
    assert max(returns[-10:]) > 1.5, returns
