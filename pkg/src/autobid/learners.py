"""Adversarial learners with time-varying reward ranges.

* :class:`Hedge` -- exponential weights whose step size follows the
  running range ``U_t`` and a goodness width ``delta``.
* :class:`HedgeBank` -- many Hedge instances over one action set, each
  started at a different round; the vectorized form used by restarts.
* :class:`IntervalMeta` -- a Hedge over start rounds that mixes restarted
  copies of a learner bank, giving regret bounds on every interval.
* :class:`ExpSix` -- bandit exponential weights with implicit exploration
  and uniform mixing.

Every learner folds the announced ranges through a running max, so the
ranges it works with never decrease.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Rewards may overshoot their range by this much before it counts as a bug.
RANGE_SLACK = 1e-6


def delta_floor(K: int, T: int) -> float:
    return 4.0 * math.log(K) / T if K > 1 else 0.0


def clamp_delta(delta: float, K: int, T: int) -> float:
    """Raise ``delta`` to the smallest value the Hedge bound covers."""
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    floor = delta_floor(K, T)
    if delta < floor:
        logger.warning("delta %.4g below 4 log K / T = %.4g; clamped", delta, floor)
        return floor
    return float(delta)


def check_rewards(r: np.ndarray, u: float) -> np.ndarray:
    """Clip rewards into ``[0, u]`` after rejecting real range violations."""
    r = np.asarray(r, dtype=float)
    if not r.size:
        return r
    lo, hi = r.min(), r.max()
    if hi > u + RANGE_SLACK or lo < -RANGE_SLACK:
        raise ValueError(f"rewards in [{lo:.6g}, {hi:.6g}] fall outside [0, {u:.6g}]")
    return r if (lo >= 0.0 and hi <= u) else np.clip(r, 0.0, u)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def restart_starts(T: int, mode: str = "full") -> np.ndarray:
    """Rounds (1-based) at which restarted learners begin."""
    if mode == "full":
        return np.arange(1, T + 1)
    if mode == "sparse":
        return 2 ** np.arange(int(math.floor(math.log2(T))) + 1)
    if mode == "none":
        return np.array([1])
    raise ValueError(f"unknown restart grid {mode!r}")


class Hedge:
    """Exponential weights for rewards in ``[0, U_t]``.

    The step size is ``eta_t = sqrt(log K / (T delta)) / U_t``.  When some
    action is within ``delta * U_t`` of the best one every round, the
    expected regret of every prefix ``tau`` is at most
    ``4 U_tau sqrt(T delta log K)``.
    """

    def __init__(self, K: int, T: int, delta: float = 1.0):
        if K < 1 or T < 1:
            raise ValueError("need K >= 1 and T >= 1")
        self.K = int(K)
        self.T = int(T)
        self.delta = clamp_delta(delta, self.K, self.T)
        self.coef = math.sqrt(math.log(self.K) / (self.T * self.delta))
        self.cum_rewards = np.zeros(self.K)
        self.u_now = 0.0
        self.t = 0
        self.probs: Optional[np.ndarray] = None

    @property
    def eta(self) -> float:
        return self.coef / self.u_now if self.u_now > 0 else 0.0

    def step(self, u: float) -> np.ndarray:
        self.u_now = max(self.u_now, float(u))
        self.probs = softmax_rows(self.eta * self.cum_rewards)
        return self.probs

    def update(self, rewards) -> None:
        if self.probs is None:
            raise RuntimeError("update called before step")
        self.cum_rewards += check_rewards(rewards, self.u_now)
        self.t += 1
        self.probs = None


class HedgeBank:
    """Hedge instances over ``K`` shared actions, one per start round.

    All instances see the same reward vectors, so the cumulative reward of
    an instance is ``S - S_tau``, a difference of the running sum and its
    value at the start round.  The weights factor as
    ``exp(eta S) * exp(-eta S_tau)``; the second factor only changes with
    the step size, so mixing and crediting the instances costs two
    matrix-vector products per round instead of a softmax over every
    instance.  When the exponents could leave the floating point range the
    bank falls back to an explicit row softmax.
    """

    def __init__(self, K: int, T: int, delta: float = 1.0):
        self.n_actions = int(K)
        self.T = int(T)
        self.delta = clamp_delta(delta, self.n_actions, self.T)
        self.coef = math.sqrt(math.log(self.n_actions) / (self.T * self.delta))
        self.total = np.zeros(self.n_actions)
        self.snapshots = np.zeros((0, self.n_actions))
        self.u_now = 0.0
        self.t = 0
        self.eta = 0.0
        self._start = np.zeros((0, self.n_actions))
        self._spread = 0.0
        self._now = None
        self._norm = None
        self._dense = None
        self._ahead = None
        self._lift = 0.0

    @property
    def n_instances(self) -> int:
        return self.snapshots.shape[0]

    def spawn(self) -> None:
        self.snapshots = np.vstack([self.snapshots, self.total[None, :]])
        self._spread = max(self._spread, float(np.ptp(self.total)))

    def _start_factor(self, rows: np.ndarray) -> np.ndarray:
        z = rows * -self.eta
        z -= z.max(axis=1, keepdims=True)
        return np.exp(z, out=z)

    def step(self, u: float, context=None) -> None:
        self.u_now = max(self.u_now, float(u))
        eta = self.coef / self.u_now if self.u_now > 0 else 0.0
        n_old = self._start.shape[0]
        if eta != self.eta:
            self.eta = eta
            n_old = 0
            self._ahead = None
        if self.n_instances > n_old:
            fresh = self._start_factor(self.snapshots[n_old:])
            self._start = fresh if n_old == 0 else np.vstack([self._start, fresh])
        # The product of the two factors must stay above the underflow point;
        # u * t bounds the spread of the running sum without a pass over it.
        if (self.eta * (self.u_now * self.t + self._spread) <= 700.0
                or self.eta * (np.ptp(self.total) + self._spread) <= 700.0):
            if self._ahead is not None:
                # Factors for this round were prepared by the last update.
                self._now, norm = self._ahead
                if self._start.shape[0] > norm.size:
                    norm = np.concatenate([norm, self._start[norm.size:] @ self._now])
                self._norm = norm
            else:
                self._now = np.exp(self.eta * (self.total - self.total.max()))
                self._norm = self._start @ self._now
                self._lift = 0.0
            self._dense = None
        else:
            z = self.eta * (self.total[None, :] - self.snapshots)
            self._dense = softmax_rows(z)
            self._now = self._norm = None
        self._ahead = None

    @property
    def probs(self) -> np.ndarray:
        """Distributions of all instances, one row each."""
        if self._dense is not None:
            return self._dense
        return self._start * self._now / self._norm[:, None]

    def mixture(self, weights: np.ndarray) -> np.ndarray:
        """Mixture of the instance distributions under ``weights``."""
        if self._dense is not None:
            return weights @ self._dense
        q = self._now * ((weights / self._norm) @ self._start)
        return q / q.sum()

    def expected(self, rewards: np.ndarray) -> np.ndarray:
        """Expected reward of every instance under its current distribution."""
        if self._dense is not None:
            return self._dense @ rewards
        return (self._start @ (self._now * rewards)) / self._norm

    def learn(self, rewards) -> np.ndarray:
        """:meth:`expected` followed by :meth:`update`, sharing one pass."""
        return self._learn(check_rewards(rewards, self.u_now))

    def _learn(self, r: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            out = self._dense @ r
            self.update(r)
            return out
        self.total += r
        self.t += 1
        # Scaling the current factor leaves every distribution unchanged,
        # so only the columns with nonzero reward are touched and the
        # normalizers grow by nonnegative increments.
        nz = r != 0.0
        a = int(nz.argmax())
        if not nz[a]:
            self._ahead = (self._now, self._norm)
            return np.zeros(self.n_instances)
        b = r.size - int(nz[::-1].argmax())
        rs = r[a:b]
        grow = np.exp(self.eta * rs)
        now = self._now[a:b]
        pair = np.empty((2, b - a))
        np.multiply(now, rs, out=pair[0])
        np.multiply(now, grow - 1.0, out=pair[1])
        both = self._start[:, a:b] @ pair.T
        out = both[:, 0] / self._norm
        now *= grow
        self._lift += self.eta * float(rs.max())
        # Recompute from the sums before the factor can overflow.
        self._ahead = (self._now, self._norm + both[:, 1]) if self._lift < 300.0 else None
        return out

    def update(self, rewards) -> None:
        self.total += check_rewards(rewards, self.u_now)
        self.t += 1
        self._ahead = None


class ListBank:
    """Bank built from independent learner objects.

    ``factory()`` must return an object with ``step(u) -> probs`` and
    ``update(rewards)``; all of them share one action set.
    """

    def __init__(self, factory: Callable[[], object], n_actions: int):
        self.factory = factory
        self.n_actions = int(n_actions)
        self.learners: List[object] = []

    @property
    def n_instances(self) -> int:
        return len(self.learners)

    def spawn(self) -> None:
        self.learners.append(self.factory())

    def step(self, u: float, context=None) -> np.ndarray:
        return np.vstack([lrn.step(u) for lrn in self.learners])

    def update(self, rewards) -> None:
        for lrn in self.learners:
            lrn.update(rewards)


class IntervalMeta:
    """Mixture of restarted learners weighted by a Hedge over start rounds.

    A copy of the bank's learner is started at every round of the restart
    grid.  The meta Hedge has one action per grid start (``delta = 1``).
    Each round the active copies are stepped first and their distributions
    mixed with the meta weights renormalized over active starts.  Active
    starts are credited the expected reward of their own copy; starts not
    yet reached are credited the expected reward of the mixture.
    """

    def __init__(self, bank, T: int, grid: str = "full",
                 starts: Optional[Sequence[int]] = None):
        self.bank = bank
        self.T = int(T)
        self.grid = grid
        self.starts = np.asarray(starts if starts is not None
                                 else restart_starts(self.T, grid), dtype=np.int64)
        if self.starts[0] != 1 or np.any(np.diff(self.starts) <= 0):
            raise ValueError("starts must be increasing and begin at round 1")
        self.meta = Hedge(len(self.starts), self.T, 1.0)
        self.t = 0
        self.n_active = 0
        self.weights: Optional[np.ndarray] = None
        self._dense: Optional[np.ndarray] = None
        self._mixed: Optional[np.ndarray] = None
        self._stepped = False
        # Banks exposing mixture/learn never build the dense matrix.
        self._factored = hasattr(bank, "mixture")

    @property
    def n_actions(self) -> int:
        return self.bank.n_actions

    @property
    def sub_probs(self) -> np.ndarray:
        """Distributions of the active copies, one row per start."""
        return self.bank.probs if self._factored else self._dense

    @property
    def probs(self) -> np.ndarray:
        """Mixed distribution of the current round, computed on first use."""
        if not self._stepped:
            raise RuntimeError("no distribution before step")
        if self._mixed is None:
            self._mixed = (self.bank.mixture(self.weights) if self._factored
                           else self.weights @ self._dense)
        return self._mixed

    def advance(self, u: float, context=None) -> None:
        """Step every copy and the meta Hedge without forming the mixture."""
        self.t += 1
        while self.n_active < len(self.starts) and self.starts[self.n_active] <= self.t:
            self.bank.spawn()
            self.n_active += 1
        out = self.bank.step(u, context)
        self._dense = None if self._factored else out
        p = self.meta.step(u)[: self.n_active]
        self.weights = p / p.sum()
        self._mixed = None
        self._stepped = True

    def step(self, u: float, context=None) -> np.ndarray:
        self.advance(u, context)
        return self.probs

    def _credits(self, sub: np.ndarray) -> np.ndarray:
        # Starts not yet reached earn the mixture's reward, weights @ sub.
        out = np.full(len(self.starts), float(self.weights @ sub))
        out[: self.n_active] = sub
        return out

    def credits(self, rewards) -> np.ndarray:
        """Per-start rewards fed to the meta Hedge for this round."""
        r = np.asarray(rewards, dtype=float)
        return self._credits(self.bank.expected(r) if self._factored else self._dense @ r)

    def update(self, rewards) -> None:
        if not self._stepped:
            raise RuntimeError("update called before step")
        r = check_rewards(rewards, self.meta.u_now)
        if self._factored:
            # The meta range is the bank's range, so r is already checked.
            sub = self.bank._learn(r)
        else:
            sub = self._dense @ r
            self.bank.update(r)
        self.meta.update(np.minimum(self._credits(sub), self.meta.u_now))
        self._stepped = False


class ExpSix:
    """Bandit exponential weights with implicit exploration and mixing.

    Losses lie in ``[0, U_t]``.  With ``sigma = 1/T``,
    ``xi = 1 / (2 sqrt(T K))`` and ``theta = 1 / sqrt(T K)`` the update is

        w'(a) = (1 - sigma) w(a) exp(-eta l~(a)) + sigma/K sum_a' w(a') exp(-eta l~(a'))

    with ``l~(a) = l(a) / (p(a) + xi)`` on the played action only and
    ``eta = theta / U_{t+1}``.  Because ``eta`` needs the next range, the
    update is applied lazily at the next :meth:`step`.  Weights are kept
    normalized; the mixing keeps every probability at least ``sigma / K``.
    """

    def __init__(self, K: int, T: int):
        if K < 1 or T < 1:
            raise ValueError("need K >= 1 and T >= 1")
        self.K = int(K)
        self.T = int(T)
        self.sigma = 1.0 / self.T
        self.xi = 1.0 / (2.0 * math.sqrt(self.T * self.K))
        self.theta = 1.0 / math.sqrt(self.T * self.K)
        self.probs = np.full(self.K, 1.0 / self.K)
        self.u_now = 0.0
        self.t = 0
        self._pending = None
        self._stepped = False
        self.last_action: Optional[int] = None

    def step(self, u: float) -> np.ndarray:
        self.u_now = max(self.u_now, float(u))
        if self._pending is not None:
            a, est = self._pending
            eta = self.theta / self.u_now
            w = self.probs.copy()
            w[a] *= math.exp(-eta * est)
            self.probs = (1.0 - self.sigma) * w / w.sum() + self.sigma / self.K
            self._pending = None
        self._stepped = True
        return self.probs

    def sample(self, rng: np.random.Generator) -> int:
        if not self._stepped:
            raise RuntimeError("sample called before step")
        cdf = np.cumsum(self.probs)
        a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        self.last_action = min(a, self.K - 1)
        return self.last_action

    def loss_estimate(self, action: int, loss: float) -> float:
        return loss / (self.probs[action] + self.xi)

    def update(self, action: int, loss: float) -> None:
        if not self._stepped:
            raise RuntimeError("update called before step")
        if loss > self.u_now + RANGE_SLACK or loss < -RANGE_SLACK:
            raise ValueError(f"loss {loss:.6g} outside [0, {self.u_now:.6g}]")
        loss = min(max(loss, 0.0), self.u_now)
        self._pending = (int(action), self.loss_estimate(action, loss))
        self._stepped = False
        self.t += 1
