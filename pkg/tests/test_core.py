import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autobid.core import (TOL, ConstraintSpec, Multipliers, Objective, PaymentRule, ScaleParams,
                          chi_psi, guarded_bid, is_risky, lagrangian, payment, safe_bid,
                          scaled_reward, won)

unit = st.floats(0.0, 1.0, allow_nan=False)
rules = st.one_of(st.just(PaymentRule.first()), st.just(PaymentRule.second()),
                  unit.map(PaymentRule.mixed))
scales = st.tuples(st.floats(1.0, 5.0), st.floats(0.0, 5.0))


def reference_reward(q, chi, psi, v, b, d):
    # Exact rational arithmetic on the same formula, no numpy.
    q, chi, psi, v, b, d = map(Fraction, (q, chi, psi, v, b, d))
    if b < d:
        return Fraction(0)
    return chi * v - psi * (q * b + (1 - q) * d)


def test_rule_constructors_pin_q():
    assert PaymentRule.first().q == 1.0
    assert PaymentRule.second().q == 0.0
    assert PaymentRule("first", 0.3).q == 1.0
    assert PaymentRule.mixed(0.25).q == 0.25
    assert PaymentRule.first().is_first and not PaymentRule.mixed(0.5).is_first


@pytest.mark.parametrize("bad", [lambda: PaymentRule.mixed(1.5), lambda: PaymentRule("vickrey"),
                                 lambda: Objective("profit"), lambda: Objective("quasi_linear", 2.0),
                                 lambda: Multipliers(-1.0, 0.0), lambda: ConstraintSpec(0.0),
                                 lambda: ScaleParams(0.0, 1.0), lambda: ScaleParams(1.0, math.inf)])
def test_invalid_parameters_raise(bad):
    with pytest.raises(ValueError):
        bad()


def test_scale_params_lift_range():
    assert ScaleParams(1.5, 2.0).u_cap == 2.0
    assert ScaleParams(1.5, 2.0, 3.0).u_cap == 3.0


def test_payment_and_ties():
    assert payment(PaymentRule.first(), 0.6, 0.2) == pytest.approx(0.6)
    assert payment(PaymentRule.second(), 0.6, 0.2) == pytest.approx(0.2)
    assert payment(PaymentRule.mixed(0.25), 0.6, 0.2) == pytest.approx(0.3)
    assert won(0.5, 0.5) and won(0.5, 0.5 + TOL / 2) and not won(0.5, 0.5 + 1e-9)
    with pytest.raises(ValueError):
        payment(PaymentRule.first(), 1.2, 0.0)


def test_chi_psi_by_objective():
    m = Multipliers(0.3, 0.5)
    assert chi_psi(Objective(), m) == pytest.approx((1.5, 0.8))
    assert chi_psi(Objective("quasi_linear", 0.4), m) == pytest.approx((1.5, 1.2))


def test_lagrangian_adds_budget_term():
    rule, obj, m = PaymentRule.second(), Objective(), Multipliers(0.5, 0.25)
    got = lagrangian(rule, obj, m, 0.4, 0.8, 0.7, 0.3)
    want = 1.25 * 0.8 - 0.75 * 0.3 + 0.5 * 0.4
    assert got == pytest.approx(want, abs=1e-15)
    assert lagrangian(rule, obj, m, 0.4, 0.8, 0.2, 0.3) == pytest.approx(0.2)


@given(rules, scales, unit, unit, unit)
def test_scaled_reward_matches_rational_reference(rule, sc, v, b, d):
    got = scaled_reward(rule, sc, v, b, d)
    want = reference_reward(rule.q, sc[0], sc[1], v, b, d)
    if abs(b - d) > 1e-9:
        assert got == pytest.approx(float(want), abs=1e-12)


@given(rules, scales, unit)
def test_safe_bid_closed_form(rule, sc, v):
    chi, psi = sc
    s = safe_bid(rule, v, chi, psi)
    if rule.q == 1.0:
        assert s == 0.0
    elif psi == 0.0:
        assert s == 1.0
    else:
        assert s == min(chi * v / psi, 1.0)


@given(rules, scales, unit, unit)
@settings(max_examples=200)
def test_safe_and_guarded_bids_never_lose(rule, sc, v, b):
    chi, psi = sc
    d = np.concatenate([np.linspace(0.0, 1.0, 201), [b]])
    s = safe_bid(rule, v, chi, psi)
    g = guarded_bid(rule, v, chi, psi, b)
    assert np.all(scaled_reward(rule, sc, v, s, d) >= -TOL)
    assert np.all(scaled_reward(rule, sc, v, g, d) >= -TOL)
    if is_risky(v, chi, psi, b):
        assert g == s
        assert np.all(scaled_reward(rule, sc, v, s, d) >= scaled_reward(rule, sc, v, b, d) - TOL)
    else:
        assert g == b


def test_risky_threshold_at_worst_competing_bid():
    # Worst case is d = b, with reward chi v - psi b.
    assert not is_risky(0.5, 1.0, 1.0, 0.5)
    assert is_risky(0.5, 1.0, 1.0, 0.5 + 1e-9)
    assert not is_risky(0.5, 1.0, 0.0, 1.0)


def test_objective_gain():
    assert Objective().gain(True, 0.7, 0.4) == pytest.approx(0.7)
    assert Objective("quasi_linear", 0.5).gain(True, 0.7, 0.4) == pytest.approx(0.5)
    assert Objective("quasi_linear", 0.5).gain(False, 0.7, 0.4) == 0.0


def test_budget_is_rate_times_horizon():
    assert ConstraintSpec(0.25).budget(64) == 16.0
