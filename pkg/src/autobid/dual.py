"""Projected online gradient descent on the Lagrange multipliers.

The dual player minimizes the Lagrangian, whose gradients with respect to
the budget multiplier ``lam`` and the ROI multiplier ``mu`` are

    dL/dlam = rho - x p,        dL/dmu = x (v - p).
"""

from __future__ import annotations

import dataclasses
import math

from .core import Multipliers


@dataclasses.dataclass
class DualState:
    rho: float
    eta: float
    cap: float = math.inf
    lam: float = 0.0
    mu: float = 0.0

    @classmethod
    def for_horizon(cls, rho: float, T: int, eta: float = None, cap: float = math.inf):
        """Default step size ``1 / sqrt(T)``."""
        return cls(rho, 1.0 / math.sqrt(T) if eta is None else float(eta), cap)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("dual step size must be positive")
        if not self.cap > 0:
            raise ValueError("multiplier cap must be positive")

    def step(self) -> Multipliers:
        return Multipliers(self.lam, self.mu)

    def update(self, x: float, p: float, v: float) -> None:
        """Gradient step from a realized (or expected) round outcome."""
        self.update_moments(x * p, x * v)

    def update_moments(self, xp: float, xv: float) -> None:
        """Gradient step given ``E[x p]`` and ``E[x v]``."""
        self.lam = min(max(0.0, self.lam - self.eta * (self.rho - xp)), self.cap)
        self.mu = min(max(0.0, self.mu - self.eta * (xv - xp)), self.cap)
