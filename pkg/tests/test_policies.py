import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autobid.core import PaymentRule, _guarded, _reward
from autobid.learners import HedgeBank, IntervalMeta
from autobid.policies import (BidDistribution, BucketBanditPolicy, FixedPolicy, PolyPolicy,
                              TreePolicy, bucket_bandit_sizes, bucket_index)

unit = st.floats(0.0, 1.0)
rules = st.one_of(st.just(PaymentRule.first()), st.just(PaymentRule.second()),
                  unit.map(PaymentRule.mixed))


def test_bid_distribution_merges_repeats():
    dist = BidDistribution([0.5, 0.2, 0.5], [0.25, 0.25, 0.5])
    assert dist.support.tolist() == [0.2, 0.5]
    assert dist.probs.tolist() == [0.25, 0.75]
    assert dist.mean() == pytest.approx(0.425)
    assert dist.expect(lambda b: b >= 0.3) == pytest.approx(0.75)
    draws = [dist.sample(np.random.default_rng(s)) for s in range(400)]
    assert 0.65 < np.mean(np.array(draws) == 0.5) < 0.85


def test_bucket_sizes_and_index():
    assert bucket_bandit_sizes(1.0, 1000) == (6, 6)
    assert bucket_bandit_sizes(1.0, 16) == (2, 2)
    assert bucket_bandit_sizes(16.0, 16) == (16, 1)
    assert bucket_index(0.0, 4) == 0
    assert bucket_index(0.25, 4) == 1
    assert bucket_index(0.26, 4) == 2
    assert bucket_index(1.0, 4) == 4


@given(rules, unit, st.floats(1.0, 3.0), st.floats(0.0, 3.0), unit, st.integers(1, 40))
@settings(max_examples=300, deadline=None)
def test_poly_fast_rewards_match_generic_path(rule, v, chi, psi, d, K):
    pol = PolyPolicy(rule, 10, n_levels=K)
    bids = _guarded(rule.q, v, chi, psi, pol.levels)
    want = _reward(rule.q, chi, psi, v, bids, d)
    assert np.allclose(pol._rewards(v, chi, psi, d), want, rtol=0, atol=1e-12)


def test_poly_lazy_bucket_equals_bucket_run_from_start():
    rule, T = PaymentRule.first(), 30
    pol = PolyPolicy(rule, T, L=0.2)   # N = 6 buckets
    rng = np.random.default_rng(1)
    ref = IntervalMeta(HedgeBank(T, T, 1.0), T, "sparse")
    target = 5
    for t in range(T):
        v = 0.2 if t < 20 else 5 / 6   # bucket 5 first appears at round 21
        chi, psi, u = 1.0 + 0.1 * (t % 3), 0.3 * (t % 2), 1.2
        dist = pol.step(v, chi, psi, u)
        ref.advance(u)
        if t >= 20:
            assert np.allclose(dist.weights, ref.probs, atol=1e-12)
            assert np.allclose(dist.bids, pol.bucket_bids(target, chi, psi))
        d = rng.random()
        pol.update(d)
        ref.update(pol._rewards(target / 6, chi, psi, d))
    assert sorted(pol.buckets) == [2, 5]


def test_poly_zero_value_bids_zero():
    pol = PolyPolicy(PaymentRule.second(), 8)
    dist = pol.step(0.0, 1.0, 0.5, 1.0)
    assert dist.bids.tolist() == [0.0]
    pol.update(0.3)
    with pytest.raises(RuntimeError):
        pol.update(0.3)


def test_tree_policy_slots_and_distribution():
    rule = PaymentRule.second()
    pol = TreePolicy(rule, 64, 1.0, depth=2)
    assert pol.metadata()["leaves"] == 14001
    chi, psi = 1.0, 2.0
    dist = pol.step(0.3, chi, psi, 2.0)
    assert dist.weights.sum() == pytest.approx(1.0)
    assert dist.bids.size == 14001 + 1 + pol.tree.n_nodes(1)
    # Every slot bid is guarded: none can lose money at d = b.
    assert np.all(psi * dist.bids <= chi * 0.3 + 1e-12)
    for g in pol.goodness_gaps(0.1, 2.0):
        assert np.all(g >= -1e-9)
    pol.update(0.1)


def test_tree_policy_depth_zero_bids_guarded_one():
    # The single leaf bids 1; psi * 1 > chi * v makes it risky, so the safe
    # bid replaces it: 0 under first price, chi v / psi under second price.
    first = TreePolicy(PaymentRule.first(), 1, depth=0)
    assert first.step(0.4, 1.0, 0.5, 1.0).bids.tolist() == [0.0]
    second = TreePolicy(PaymentRule.second(), 1, depth=0)
    assert second.step(0.4, 1.0, 0.5, 1.0).bids.tolist() == [pytest.approx(0.8)]
    assert second.step(0.4, 1.0, 0.2, 1.0).bids.tolist() == [1.0]


def test_tree_learns_toward_winning_bids():
    rule = PaymentRule.second()
    pol = TreePolicy(rule, 400, depth=1, restart="none")
    for _ in range(400):
        pol.step(0.9, 1.0, 0.0, 1.0)
        pol.update(0.6)
    dist = pol.step(0.9, 1.0, 0.0, 1.0)
    assert dist.expect(lambda b: b >= 0.6) > 0.9


def test_bucket_bandit_guards_with_bucket_value():
    pol = BucketBanditPolicy(PaymentRule.first(), 16)
    rng = np.random.default_rng(0)
    assert pol.step(0.0, 1.0, 1.0, 1.0, rng) == 0.0
    pol.update(False, 0.0)
    for _ in range(50):
        b = pol.step(0.3, 1.0, 2.0, 2.0, rng)   # bucket 1 of 2, v~ = 0.5
        assert b == 0.0 or 2.0 * b <= 1.0 * 0.5 + 1e-12
        pol.update(b >= 0.2, b if b >= 0.2 else 0.0)
    assert pol.counts == {1: 50}
    with pytest.raises(RuntimeError):
        pol.update(True, 0.1)


def test_fixed_policy():
    assert FixedPolicy(bid=0.4).step(0.9, 1, 1, 1).bids.tolist() == [0.4]
    f = FixedPolicy(points=[[0.0, 0.0], [1.0, 0.5]])
    assert f(0.5) == pytest.approx(0.25)
    for kw in ({}, {"bid": 0.2, "points": [[0, 0], [1, 1]]}, {"bid": 1.5},
               {"points": [[0.5, 0.0], [0.2, 0.1]]}):
        with pytest.raises(ValueError):
            FixedPolicy(**kw)
