import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marppo import advantage
from marppo.nn import ContractError
from oracles import (
    deltas_reference,
    gae_reference,
    returns_reference,
    single_agent_gae_reference,
    weighted_mean_rewards_reference,
)


def test_weighted_mean_endpoints():
    r = np.array([[1.0, 2.0, 3.0]])
    at0 = advantage.weighted_mean_rewards(r, 0.0)
    assert np.allclose(at0, r / 3.0, atol=1e-15)
    at1 = advantage.weighted_mean_rewards(r, 1.0)
    assert np.allclose(at1, [[2.0, 2.0, 2.0]], atol=1e-15)
    mid = advantage.weighted_mean_rewards(r, 0.5)
    assert np.allclose(mid, [[(1 + 0.5 * 5) / 3, (2 + 0.5 * 4) / 3, (3 + 0.5 * 3) / 3]], atol=1e-15)


def test_single_agent_discounted_returns_frozen():
    # gamma 0.5, rewards (1, 1, 1), zero bootstrap
    r = np.array([[1.0], [1.0], [1.0]])
    dones = np.zeros(3)
    got = advantage.discounted_returns(r, np.zeros(1), 0.5, 0.0, dones)
    assert np.allclose(got[:, 0], [1.75, 1.5, 1.0], atol=1e-15)


def test_gae_frozen_two_step():
    # gamma 1, lambda 1, deltas (0.5, 0.25)
    d = np.array([[0.5], [0.25]])
    got = advantage.gae(d, 1.0, 1.0, np.zeros(2))
    assert np.allclose(got[:, 0], [0.75, 0.25], atol=1e-15)


def test_beta_one_gives_identical_deltas_across_agents():
    rng = np.random.default_rng(0)
    r = rng.normal(size=(6, 3))
    v = rng.normal(size=(7, 3))
    d = advantage.multi_agent_deltas(r, v, 0.9, 1.0, np.zeros(6))
    assert np.allclose(d, d[:, :1], atol=1e-12)


def test_n1_collapses_to_single_agent():
    rng = np.random.default_rng(1)
    r = rng.normal(size=(8, 1))
    v = rng.normal(size=(9, 1))
    dones = (rng.random(8) < 0.3).astype(float)
    for beta in (0.0, 0.4, 1.0):
        d = advantage.multi_agent_deltas(r, v, 0.95, beta, dones)
        a = advantage.gae(d, 0.95, 0.9, dones)
        ref = advantage.single_agent_gae(r[:, 0], v[:, 0], 0.95, 0.9, dones)
        assert np.allclose(a[:, 0], ref, atol=1e-12)


def test_beta_zero_is_single_agent_scaled_by_inverse_n():
    # the division by N applies even with no cross-agent terms
    rng = np.random.default_rng(2)
    r = rng.normal(size=(10, 3))
    v = rng.normal(size=(11, 3))
    dones = (rng.random(10) < 0.2).astype(float)
    d = advantage.multi_agent_deltas(r, v, 0.99, 0.0, dones)
    weighted = advantage.gae(d, 0.99, 0.95, dones)
    single = advantage.single_agent_gae(r, v, 0.99, 0.95, dones)
    assert np.allclose(weighted * 3.0, single, atol=1e-12)
    wn, _, _ = advantage.normalize_advantages(weighted)
    sn, _, _ = advantage.normalize_advantages(single)
    assert np.allclose(wn, sn, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    t=st.integers(1, 8),
    n=st.integers(1, 3),
    beta=st.sampled_from([0.0, 0.3, 1.0]),
    gamma=st.floats(0.5, 1.0),
    lam=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_recursions_match_direct_summation(t, n, beta, gamma, lam, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(t, n))
    v = rng.normal(size=(t + 1, n))
    dones = (rng.random(t) < 0.25).astype(float)
    term = v[t]

    got_r = advantage.discounted_returns(r, term, gamma, beta, dones)
    assert np.allclose(got_r, returns_reference(r, term, gamma, beta, dones), atol=1e-10)

    d = advantage.multi_agent_deltas(r, v, gamma, beta, dones)
    assert np.allclose(d, deltas_reference(r, v, gamma, beta, dones), atol=1e-10)

    got_a = advantage.gae(d, gamma, lam, dones)
    assert np.allclose(got_a, gae_reference(d, gamma, lam, dones), atol=1e-10)

    for i in range(n):
        ref = single_agent_gae_reference(r[:, i], v[:, i], gamma, lam, dones)
        assert np.allclose(advantage.single_agent_gae(r[:, i], v[:, i], gamma, lam, dones), ref, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(t=st.integers(1, 8), n=st.integers(1, 3), beta=st.floats(0.0, 1.0), seed=st.integers(0, 2**31 - 1))
def test_weighted_mean_matches_loops(t, n, beta, seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(t, n))
    got = advantage.weighted_mean_rewards(r, beta)
    assert np.allclose(got, weighted_mean_rewards_reference(r, beta), atol=1e-12)


def test_done_truncates_all_leakage():
    rng = np.random.default_rng(3)
    r = rng.normal(size=(6, 2))
    v = rng.normal(size=(7, 2))
    dones = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    base_r = advantage.discounted_returns(r, v[6], 0.9, 0.5, dones)
    base_d = advantage.multi_agent_deltas(r, v, 0.9, 0.5, dones)
    base_a = advantage.gae(base_d, 0.9, 0.95, dones)
    r2 = r.copy()
    r2[3:] += 100.0  # a later episode must not leak backwards
    got_r = advantage.discounted_returns(r2, v[6], 0.9, 0.5, dones)
    got_a = advantage.gae(advantage.multi_agent_deltas(r2, v, 0.9, 0.5, dones), 0.9, 0.95, dones)
    assert np.allclose(base_r[:3], got_r[:3], atol=1e-12)
    assert np.allclose(base_a[:3], got_a[:3], atol=1e-12)


def test_normalize_advantages_standardizes():
    rng = np.random.default_rng(4)
    adv = rng.normal(loc=3.0, scale=2.5, size=(50, 3))
    normed, mean, std = advantage.normalize_advantages(adv)
    assert abs(normed.mean()) < 1e-6
    assert abs(normed.std() - 1.0) < 1e-6
    assert abs(mean - adv.mean()) < 1e-12
    assert abs(std - adv.std()) < 1e-12
    # ranking is preserved
    flat = adv.ravel()
    nflat = normed.ravel()
    assert np.array_equal(np.argsort(flat), np.argsort(nflat))


def test_contract_violations_raise():
    r = np.zeros((4, 2))
    with pytest.raises(ContractError):
        advantage.weighted_mean_rewards(r, 1.5)
    with pytest.raises(ContractError):
        advantage.discounted_returns(r, np.zeros(3), 0.9, 0.5, np.zeros(4))
    with pytest.raises(ContractError):
        advantage.multi_agent_deltas(r, np.zeros((4, 2)), 0.9, 0.5, np.zeros(4))
    with pytest.raises(ContractError):
        advantage.gae(r, 0.9, 0.95, np.zeros(3))
