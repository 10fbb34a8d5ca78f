import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from autobid import oracle
from autobid.core import Objective, PaymentRule
from autobid.environments import discrete_joint, point_mass, product, tight_beta
from autobid.oracle import (beta_alpha_diagnostic, bid_table, expected_value_payment,
                            grid_search_lp, interval_regret_probe, lipschitz_candidates,
                            metrics, solve_lp, solve_opt, stats_from_bids)


def linprog_value(o, p, r, rho):
    res = linprog(-o, A_ub=np.vstack([p, -r]), b_ub=[rho, 0.0], A_eq=np.ones((1, o.size)),
                  b_eq=[1.0], bounds=(0, None), method="highs")
    return -res.fun if res.status == 0 else None


def random_instance(rng, n):
    o = rng.random(n)
    p = rng.random(n)
    r = o - p * rng.uniform(0.5, 1.5, n)
    o[0] = p[0] = r[0] = 0.0   # the zero bid keeps the LP feasible
    return o, p, r


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0.05, 1.0))
@settings(max_examples=80, deadline=None)
def test_support_enumeration_matches_simplex(seed, n, rho):
    o, p, r = random_instance(np.random.default_rng(seed), n)
    sol = solve_lp(o, p, r, rho)
    assert sol.value == pytest.approx(linprog_value(o, p, r, rho), abs=1e-9)
    assert len(sol.support) <= 3
    w = np.array(sol.weights)
    assert w.sum() == pytest.approx(1.0) and np.all(w >= 0)
    assert w @ p[sol.support] <= rho + 1e-9
    assert w @ r[sol.support] >= -1e-9


def test_highs_fallback_agrees(monkeypatch):
    o, p, r = random_instance(np.random.default_rng(11), 40)
    exact = solve_lp(o, p, r, 0.3)
    monkeypatch.setattr(oracle, "ENUM_LIMIT", 0)
    fallback = solve_lp(o, p, r, 0.3)
    assert fallback.value == pytest.approx(exact.value, abs=1e-9)


def test_grid_search_agrees_on_small_instance():
    o, p, r = random_instance(np.random.default_rng(2), 5)
    assert grid_search_lp(o, p, r, 0.4) == pytest.approx(solve_lp(o, p, r, 0.4).value, abs=1e-6)


def test_infeasible_candidate_set_raises():
    with pytest.raises(ValueError):
        solve_lp(np.array([1.0]), np.array([0.9]), np.array([0.1]), 0.5)
    with pytest.raises(ValueError):
        solve_lp(np.array([]), np.array([]), np.array([]), 0.5)


@pytest.mark.parametrize("beta", [0.05, 0.1, 0.25, 0.4])
def test_tight_beta_opt_is_one_minus_beta(beta):
    env = tight_beta(beta)
    sol = solve_opt(env, lipschitz_candidates(env, 1.0), PaymentRule.second())
    assert sol.value == pytest.approx(1.0 - beta, abs=1e-12)
    assert sol.roi_binding


def test_expected_stats_by_hand():
    env = discrete_joint([(1.0, 0.2), (0.5, 0.6)], [0.5, 0.5])
    v, pay, roi = expected_value_payment(env, 0.4, PaymentRule.first())
    assert (v, pay, roi) == pytest.approx((0.5, 0.2, 0.3))
    v, pay, roi = expected_value_payment(env, 0.7, PaymentRule.second())
    assert (v, pay, roi) == pytest.approx((0.75, 0.4, 0.35))
    obj, *_ = stats_from_bids(env, np.array([[0.7, 0.7]]), PaymentRule.second(),
                              Objective("quasi_linear", 0.5))
    assert obj[0] == pytest.approx(0.55)
    with pytest.raises(ValueError):
        bid_table(env, [1.5])


def lipschitz_brute(values, levels, L):
    return {c for c in itertools.product(levels, repeat=len(values))
            if all(abs(c[i] - c[j]) <= L * abs(values[i] - values[j]) + 1e-12
                   for i in range(len(values)) for j in range(i))}


@pytest.mark.parametrize("L", [0.5, 1.0, 2.0])
def test_lipschitz_candidates_match_brute_force(L):
    env = product([0.2, 0.5, 0.9], [0.3, 0.3, 0.4], [0.0, 0.25, 0.6], [0.4, 0.3, 0.3])
    cands = lipschitz_candidates(env, L)
    idx = [int(np.flatnonzero(env.v == x)[0]) for x in env.value_atoms()]
    got = {tuple(row[idx]) for row in cands}
    assert got == lipschitz_brute(env.value_atoms(), [0.0, 0.25, 0.6, 1.0], L)
    assert len(got) == cands.shape[0]


def test_metrics_by_hand():
    rep = metrics(np.array([0.5, 0.0, 0.0, 1.0]), np.array([0.1, -0.2, 0.3, 0.0]),
                  np.array([0.2, 0.0, 0.1, 0.4]), 0.5, 2.0)
    assert rep.regret == pytest.approx(0.5)
    assert rep.max_roi_violation == pytest.approx(0.2)
    assert rep.budget_used == pytest.approx(0.7)
    assert rep.worst_interval_shortfall == pytest.approx(1.0)
    assert rep.worst_interval == (2, 3)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30))
def test_max_subarray_matches_brute_force(xs):
    x = np.array(xs)
    best, (a, b) = oracle._max_subarray(x)
    brute = max(x[i:j].sum() for i in range(x.size) for j in range(i + 1, x.size + 1))
    assert best == pytest.approx(brute, abs=1e-12)
    assert x[a - 1:b].sum() == pytest.approx(best, abs=1e-12)


def test_interval_probe_matches_brute_force():
    rng = np.random.default_rng(0)
    R = rng.random((25, 3))
    P = rng.dirichlet(np.ones(3), 25)
    got, (a, b) = interval_regret_probe(R, P)
    brute = max((R[i:j].sum(0)).max() - (R[i:j] * P[i:j]).sum()
                for i in range(25) for j in range(i + 1, 26))
    assert got == pytest.approx(brute, abs=1e-12)
    seg = slice(a - 1, b)
    assert R[seg].sum(0).max() - (R[seg] * P[seg]).sum() == pytest.approx(got, abs=1e-12)


def test_beta_alpha_diagnostic_by_hand():
    env = point_mass(0.8, 0.3)
    out = beta_alpha_diagnostic(env, 0.5, PaymentRule.first(), 0.5)
    assert out["beta_measured"] == pytest.approx(0.3)
    assert out["mixture_roi"] == pytest.approx(0.15)
    assert out["mixture_payment"] == pytest.approx(0.25)
    assert out["roi_ok"] and out["payment_ok"]
