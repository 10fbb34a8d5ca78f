"""Finite-support generators of ``(v, d)`` rounds.

Every environment is a list of atoms ``(v_k, d_k)`` with probabilities, so
expectations under it are exact sums.  Sampling draws atom indices from a
caller-owned numpy generator.
"""

from __future__ import annotations

import dataclasses
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

PROB_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class FiniteEnv:
    """Joint distribution over finitely many ``(v, d)`` atoms."""

    v: np.ndarray
    d: np.ndarray
    probs: np.ndarray
    name: str = "discrete"

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if not (v.shape == d.shape == p.shape) or v.size == 0:
            raise ValueError("atoms and probabilities must be nonempty and aligned")
        for label, x in (("v", v), ("d", d)):
            if np.any(x < 0.0) or np.any(x > 1.0):
                raise ValueError(f"{label} atoms must lie in [0, 1]")
        if np.any(p < 0.0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        for field, x in (("v", v), ("d", d), ("probs", p)):
            x.setflags(write=False)
            object.__setattr__(self, field, x)

    @property
    def n_atoms(self) -> int:
        return self.v.size

    def value_atoms(self) -> np.ndarray:
        return np.unique(self.v)

    def d_atoms(self) -> np.ndarray:
        return np.unique(self.d)

    def sample(self, rng: np.random.Generator) -> Tuple[float, float]:
        k = rng.choice(self.n_atoms, p=self.probs)
        return float(self.v[k]), float(self.d[k])

    def sample_many(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        k = rng.choice(self.n_atoms, size=n, p=self.probs)
        return self.v[k], self.d[k]


def discrete_joint(atoms: Sequence[Tuple[float, float]], probs: Sequence[float]) -> FiniteEnv:
    atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
    return FiniteEnv(atoms[:, 0], atoms[:, 1], np.asarray(probs, dtype=float), "discrete")


def product(v_atoms, v_probs, d_atoms, d_probs) -> FiniteEnv:
    """Independent marginals for ``v`` and ``d``."""
    v_atoms, v_probs = np.asarray(v_atoms, float), np.asarray(v_probs, float)
    d_atoms, d_probs = np.asarray(d_atoms, float), np.asarray(d_probs, float)
    if v_atoms.shape != v_probs.shape or d_atoms.shape != d_probs.shape:
        raise ValueError("marginal atoms and probabilities must be aligned")
    vv, dd = np.meshgrid(v_atoms, d_atoms, indexing="ij")
    pp = np.outer(v_probs, d_probs)
    return FiniteEnv(vv.ravel(), dd.ravel(), pp.ravel(), "product")


def point_mass(v: float, d: float) -> FiniteEnv:
    return FiniteEnv(np.array([v]), np.array([d]), np.array([1.0]), "point")


def tight_beta(beta: float) -> FiniteEnv:
    """``(1, 0)`` with probability beta, else ``((1-2 beta)/(1-beta), 1)``."""
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    low = (1.0 - 2.0 * beta) / (1.0 - beta)
    return FiniteEnv(np.array([1.0, low]), np.array([0.0, 1.0]),
                     np.array([beta, 1.0 - beta]), "tight_beta")


def bandit_lb_grid(T: int) -> Tuple[int, Fraction]:
    """Number of inner atoms ``K`` (even, at least 2) and spacing ``eps = 1/(3K)``."""
    if T < 8:
        raise ValueError("need T >= 8")
    K = max(2, 2 * int(round(T ** (1.0 / 3.0))))
    return K, Fraction(1, 3 * K)


def _cdf_base(x: Fraction) -> Fraction:
    return Fraction(3) / (4 - x)


def bandit_lb_masses(T: int, j: Optional[int] = None) -> List[Tuple[Fraction, Fraction]]:
    """Exact ``(atom, mass)`` pairs of the competing-bid law.

    Atoms are ``0, d_0, ..., d_{K-1}, 1`` with ``d_i = 1/3 + i eps``.  The
    base law has CDF ``3 / (4 - x)`` on ``[0, 2/3)``.  Variant ``j`` raises
    the CDF on ``[d_j, d_{j+1})`` to its base value at ``d_{j+1}``, which
    moves ``F(d_{j+1}) - F(d_j)`` of mass from the next atom up onto ``d_j``
    (``d_K = 2/3``, so for ``j = K - 1`` the mass comes from the atom 1).
    """
    K, eps = bandit_lb_grid(T)
    if j is not None and not 0 <= j < K:
        raise ValueError(f"perturbation index must lie in 0..{K - 1}, got {j}")
    inner = [Fraction(1, 3) + i * eps for i in range(K + 1)]  # inner[K] = 2/3
    cdf = [_cdf_base(x) for x in inner[:K]]
    if j is not None:
        cdf[j] = _cdf_base(inner[j + 1])
    masses = [(Fraction(0), _cdf_base(Fraction(0)))]
    prev = masses[0][1]
    for i in range(K):
        masses.append((inner[i], cdf[i] - prev))
        prev = cdf[i]
    masses.append((Fraction(1), 1 - prev))
    if sum(m for _, m in masses) != 1 or any(m < 0 for _, m in masses):
        raise ArithmeticError("competing-bid masses do not form a distribution")
    return masses


def bandit_lb(T: int, j: Optional[int] = None, v: float = 1.0) -> FiniteEnv:
    """Value fixed at ``v`` and competing bids from :func:`bandit_lb_masses`."""
    masses = bandit_lb_masses(T, j)
    d = np.array([float(a) for a, _ in masses])
    p = np.array([float(m) for _, m in masses])
    p /= p.sum()
    name = "bandit_lb" if j is None else f"bandit_lb[{j}]"
    return FiniteEnv(np.full(d.size, float(v)), d, p, name)


def bandit_lb_epsilon(T: int) -> float:
    return float(bandit_lb_grid(T)[1])


def bandit_lb_opt_bound(T: int) -> float:
    """Per-round lower bound ``13/16 + 3 eps / 32`` on OPT of any perturbed law."""
    return 13.0 / 16.0 + 3.0 * bandit_lb_epsilon(T) / 32.0


def tight_beta_regret_formula(beta: float, T: int) -> float:
    """Expected regret lower bound ``(1-2b) sqrt(T / (2 pi b (1-b)))``."""
    return (1.0 - 2.0 * beta) * math.sqrt(T / (2.0 * math.pi * beta * (1.0 - beta)))
