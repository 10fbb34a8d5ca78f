"""Auction primitives.

Payment rules, the multiplier-scaled per-round reward, the Lagrangian and
the safe-bid machinery used by every primal learner.

A round is a pair ``(v, d)`` with value ``v`` and highest competing bid
``d``, both in ``[0, 1]``.  A bid ``b`` wins when ``b >= d`` (ties win) and
pays ``q * b + (1 - q) * d``; ``q = 1`` is a first-price auction and
``q = 0`` a second-price one.  Given multipliers ``(lam, mu)`` the primal
learner maximizes

    r(b) = 1{b >= d} * (chi * v - psi * p(b, d))

where ``(chi, psi)`` come from :func:`chi_psi`.

The public functions validate their inputs.  The underscored helpers skip
validation, accept numpy arrays and are what the learners call in their
inner loops.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Tuple, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

# Absolute tolerance for every reward and win comparison.
TOL = 1e-12

FIRST = "first"
SECOND = "second"
MIXED = "mixed"
VALUE = "value"
QUASI_LINEAR = "quasi_linear"


@dataclasses.dataclass(frozen=True)
class PaymentRule:
    """Which price the winner pays.

    ``q`` is the weight on the own bid.  It is forced to 1 for first price
    and to 0 for second price.
    """

    kind: str = FIRST
    q: float = 1.0

    def __post_init__(self):
        if self.kind == FIRST:
            object.__setattr__(self, "q", 1.0)
        elif self.kind == SECOND:
            object.__setattr__(self, "q", 0.0)
        elif self.kind == MIXED:
            if not 0.0 <= self.q <= 1.0:
                raise ValueError(f"mixed rule needs q in [0, 1], got {self.q}")
            object.__setattr__(self, "q", float(self.q))
        else:
            raise ValueError(f"unknown payment rule {self.kind!r}")

    @classmethod
    def first(cls) -> "PaymentRule":
        return cls(FIRST)

    @classmethod
    def second(cls) -> "PaymentRule":
        return cls(SECOND)

    @classmethod
    def mixed(cls, q: float) -> "PaymentRule":
        return cls(MIXED, q)

    @property
    def is_first(self) -> bool:
        return self.q == 1.0


@dataclasses.dataclass(frozen=True)
class Objective:
    """Value maximization, or quasi-linear utility ``v - nu * p``."""

    kind: str = VALUE
    nu: float = 1.0

    def __post_init__(self):
        if self.kind not in (VALUE, QUASI_LINEAR):
            raise ValueError(f"unknown objective {self.kind!r}")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu}")

    def gain(self, won: ArrayLike, v: ArrayLike, p: ArrayLike) -> ArrayLike:
        """Objective collected in a round."""
        if self.kind == VALUE:
            return won * v
        return won * (v - self.nu * p)


@dataclasses.dataclass(frozen=True)
class RoundSample:
    v: float
    d: float

    def __post_init__(self):
        _check_unit("v", self.v)
        _check_unit("d", self.d)


@dataclasses.dataclass(frozen=True)
class Multipliers:
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not (self.lam >= 0.0 and self.mu >= 0.0):
            raise ValueError(f"multipliers must be nonnegative, got {self}")


@dataclasses.dataclass(frozen=True)
class ScaleParams:
    """Reward scales of one round and the running range ``u_cap``."""

    chi: float
    psi: float
    u_cap: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.chi) and math.isfinite(self.psi)):
            raise ValueError("chi and psi must be finite")
        if self.chi <= 0.0 or self.psi < 0.0:
            raise ValueError(f"need chi > 0 and psi >= 0, got {self}")
        if self.u_cap < max(self.chi, self.psi):
            object.__setattr__(self, "u_cap", max(self.chi, self.psi))


@dataclasses.dataclass(frozen=True)
class ConstraintSpec:
    """Per-round budget rate; the total budget is ``rho * T``."""

    rho: float
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")

    def budget(self, T: int) -> float:
        return self.rho * T


def _check_unit(name: str, x: ArrayLike) -> None:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")


def _payment(q: float, b: ArrayLike, d: ArrayLike) -> ArrayLike:
    return q * b + (1.0 - q) * d


def _won(b: ArrayLike, d: ArrayLike) -> ArrayLike:
    return b >= d - TOL


def _reward(q, chi, psi, v, b, d):
    return np.where(_won(b, d), chi * v - psi * _payment(q, b, d), 0.0)


def _safe_bid(q, v, chi, psi):
    if q == 1.0:
        return np.zeros_like(np.asarray(v, dtype=float))
    if psi <= 0.0:
        return np.ones_like(np.asarray(v, dtype=float))
    # min(chi v, psi) / psi equals min(chi v / psi, 1) and cannot overflow.
    return np.minimum(chi * np.asarray(v, dtype=float), psi) / psi


def _is_risky(v, chi, psi, b):
    # For every rule the worst competing bid is d = b, where the reward is
    # chi * v - psi * b.
    return psi * b > chi * v + TOL


def _guarded(q, v, chi, psi, b):
    b = np.asarray(b, dtype=float)
    return np.where(_is_risky(v, chi, psi, b), _safe_bid(q, v, chi, psi), b)


def payment(rule: PaymentRule, b: ArrayLike, d: ArrayLike) -> ArrayLike:
    """Price paid by a winning bid ``b`` against competing bid ``d``."""
    _check_unit("b", b)
    _check_unit("d", d)
    return _payment(rule.q, b, d)


def won(b: ArrayLike, d: ArrayLike) -> ArrayLike:
    return _won(b, d)


def _scales(scale) -> Tuple[float, float]:
    if isinstance(scale, ScaleParams):
        return scale.chi, scale.psi
    chi, psi = scale
    return float(chi), float(psi)


def scaled_reward(rule: PaymentRule, scale, v, b, d) -> ArrayLike:
    """``1{b >= d} (chi v - psi p(b, d))``; ``scale`` is ScaleParams or (chi, psi)."""
    chi, psi = _scales(scale)
    for name, x in (("v", v), ("b", b), ("d", d)):
        _check_unit(name, x)
    r = _reward(rule.q, chi, psi, v, b, d)
    return float(r) if np.ndim(r) == 0 else r


def chi_psi(obj: Objective, m: Multipliers) -> Tuple[float, float]:
    chi = 1.0 + m.mu
    if obj.kind == VALUE:
        return chi, m.lam + m.mu
    return chi, obj.nu + m.lam + m.mu


def safe_bid(rule: PaymentRule, v: ArrayLike, chi: float, psi: float) -> ArrayLike:
    """A bid whose reward is nonnegative against every competing bid."""
    if not (math.isfinite(chi) and math.isfinite(psi)):
        raise ValueError("chi and psi must be finite")
    if chi <= 0.0 or psi < 0.0:
        raise ValueError("need chi > 0 and psi >= 0")
    _check_unit("v", v)
    out = _safe_bid(rule.q, v, chi, psi)
    return float(out) if np.ndim(out) == 0 else out


def is_risky(v: ArrayLike, chi: float, psi: float, b: ArrayLike) -> ArrayLike:
    """True when some competing bid makes ``b`` earn a negative reward."""
    return _is_risky(v, chi, psi, b)


def guarded_bid(rule: PaymentRule, v, chi: float, psi: float, candidate) -> ArrayLike:
    """Replace ``candidate`` by the safe bid when it can earn a negative reward."""
    _check_unit("candidate", candidate)
    safe_bid(rule, v, chi, psi)
    out = _guarded(rule.q, v, chi, psi, candidate)
    return float(out) if np.ndim(out) == 0 else out


def lagrangian(rule: PaymentRule, obj: Objective, m: Multipliers, rho: float,
               v, b, d) -> ArrayLike:
    """Per-round Lagrangian; equals the scaled reward plus ``lam * rho``."""
    chi, psi = chi_psi(obj, m)
    return scaled_reward(rule, (chi, psi), v, b, d) + m.lam * rho
