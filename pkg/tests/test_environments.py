import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from autobid.environments import (FiniteEnv, bandit_lb, bandit_lb_epsilon, bandit_lb_grid,
                                  bandit_lb_masses, bandit_lb_opt_bound, discrete_joint,
                                  point_mass, product, tight_beta, tight_beta_regret_formula)


def test_product_marginals():
    env = product([0.2, 0.8], [0.25, 0.75], [0.0, 0.5, 1.0], [0.5, 0.25, 0.25])
    assert env.n_atoms == 6
    assert env.probs[env.v == 0.8].sum() == pytest.approx(0.75)
    assert env.probs[env.d == 0.5].sum() == pytest.approx(0.25)
    assert list(env.value_atoms()) == [0.2, 0.8]


def test_atoms_are_read_only():
    env = point_mass(0.5, 0.3)
    with pytest.raises(ValueError):
        env.v[0] = 0.1


@pytest.mark.parametrize("args", [([0.5], [1.2], [1.0]), ([0.5], [0.2], [0.9]),
                                  ([0.5, 0.6], [0.2], [1.0]), ([], [], [])])
def test_invalid_envs_raise(args):
    with pytest.raises(ValueError):
        FiniteEnv(*[np.array(a, dtype=float) for a in args])


def test_tight_beta_atoms():
    env = tight_beta(0.1)
    assert list(env.v) == pytest.approx([1.0, 0.8 / 0.9])
    assert list(env.d) == [0.0, 1.0]
    assert list(env.probs) == pytest.approx([0.1, 0.9])
    with pytest.raises(ValueError):
        tight_beta(0.5)


def test_sampling_frequencies_and_determinism():
    env = discrete_joint([(0.1, 0.2), (0.9, 0.4)], [0.3, 0.7])
    v1, d1 = env.sample_many(np.random.default_rng(5), 20000)
    v2, d2 = env.sample_many(np.random.default_rng(5), 20000)
    assert np.array_equal(v1, v2) and np.array_equal(d1, d2)
    assert abs(np.mean(v1 == 0.9) - 0.7) < 0.02


def _masses_by_hand(K, j=None):
    # Direct differencing of the (possibly raised) CDF at every atom.
    eps = Fraction(1, 3 * K)
    d = [Fraction(1, 3) + i * eps for i in range(K + 1)]
    F = lambda x: Fraction(3) / (4 - x)
    cdf = {Fraction(0): F(Fraction(0))}
    for i in range(K):
        cdf[d[i]] = F(d[i + 1]) if i == j else F(d[i])
    cdf[Fraction(1)] = Fraction(1)
    atoms = sorted(cdf)
    return [(a, cdf[a] - (cdf[atoms[k - 1]] if k else 0)) for k, a in enumerate(atoms)]


def test_bandit_lb_grid_at_64():
    K, eps = bandit_lb_grid(64)
    assert (K, eps) == (8, Fraction(1, 24))
    assert bandit_lb_epsilon(64) == pytest.approx(1 / 24)
    assert bandit_lb_opt_bound(64) == pytest.approx(13 / 16 + 3 / (32 * 24))


def test_base_masses_exact():
    masses = dict(bandit_lb_masses(64))
    assert masses[Fraction(0)] == Fraction(3, 4)
    assert masses[Fraction(1, 3)] == Fraction(3, 44)
    assert masses[Fraction(1)] == Fraction(1, 9)
    assert sum(masses.values()) == 1


@pytest.mark.parametrize("T", [8, 64, 1000])
def test_masses_match_hand_differencing(T):
    K, _ = bandit_lb_grid(T)
    for j in [None, 0, K // 2, K - 1]:
        assert bandit_lb_masses(T, j) == _masses_by_hand(K, j)


def test_perturbation_moves_mass_down():
    K, _ = bandit_lb_grid(64)
    F = lambda x: Fraction(3) / (4 - x)
    base = dict(bandit_lb_masses(64))
    for j in (0, K - 1):
        moved = dict(bandit_lb_masses(64, j))
        d_j = Fraction(1, 3) + j * Fraction(1, 24)
        shift = F(d_j + Fraction(1, 24)) - F(d_j)
        up = Fraction(1) if j == K - 1 else d_j + Fraction(1, 24)
        assert moved[d_j] == base[d_j] + shift
        assert moved[up] == base[up] - shift
    assert dict(bandit_lb_masses(64, K - 1))[Fraction(1)] == Fraction(1, 10)
    with pytest.raises(ValueError):
        bandit_lb_masses(64, K)


def test_bandit_lb_env_float_view():
    env = bandit_lb(64, 3, v=0.9)
    assert np.all(env.v == 0.9)
    assert env.probs.sum() == pytest.approx(1.0, abs=1e-15)
    assert env.name == "bandit_lb[3]"


def test_tight_beta_regret_formula_value():
    want = 0.8 * math.sqrt(10_000 / (2 * math.pi * 0.09))
    assert tight_beta_regret_formula(0.1, 10_000) == pytest.approx(want, rel=1e-14)
    assert want == pytest.approx(106.384, abs=1e-3)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6))
def test_discrete_joint_accepts_normalized_weights(w):
    p = np.array(w) / np.sum(w)
    p[-1] = 1.0 - p[:-1].sum()
    if p[-1] < 0:
        return
    atoms = [(k / len(w), 1 - k / len(w)) for k in range(len(w))]
    env = discrete_joint(atoms, p)
    assert env.n_atoms == len(w)
