"""Bid-producing policies.

* :class:`TreePolicy` -- exponential weights over a cover tree of
  Lipschitz bidding functions.  Each internal node runs a Hedge over its
  children plus a "good" action, the largest guarded bid among the
  node's leaves.  Restarted copies of the whole tree are mixed by
  :class:`~autobid.learners.IntervalMeta`.
* :class:`BucketBanditPolicy` -- bandit feedback; values are bucketed and
  each bucket runs its own :class:`~autobid.learners.ExpSix` over a small
  bid grid, only on rounds that fall into it.
* :class:`PolyPolicy` -- full information; ``floor(L T)`` value buckets
  and ``T`` bid levels, every bucket learning every round from ``d``.
* :class:`FixedPolicy` -- a deterministic bid map, for baselines.

Full-information policies return a :class:`BidDistribution` from
``step`` and learn from ``update(d)``.  Bandit policies sample inside
``step`` and learn from ``update(won, price)``.
"""

from __future__ import annotations

import functools
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .core import TOL, PaymentRule, _guarded, _payment, _reward, _safe_bid
from .covers import (DEFAULT_DEPTH_CAP, DEFAULT_SIZE_CAP, CoverTree, build_tree,
                     select_depth)
from .learners import (ExpSix, HedgeBank, IntervalMeta, check_rewards, clamp_delta)

FULL = "full"
BANDIT = "bandit"
# Exponents below this may underflow once exponentiated.
_EXP_FLOOR = -600.0


class BidDistribution:
    """Distribution over bids, possibly listed with repeats.

    ``bids`` may repeat; :attr:`support` and :attr:`probs` merge equal bids.
    Sampling works on the raw listing, which is equivalent in law.
    """

    def __init__(self, bids, weights):
        self.bids = np.asarray(bids, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self._merged = None

    @classmethod
    def point(cls, bid: float) -> "BidDistribution":
        return cls(np.array([bid]), np.array([1.0]))

    def _merge(self):
        if self._merged is None:
            support, inv = np.unique(self.bids, return_inverse=True)
            probs = np.bincount(inv.ravel(), weights=self.weights, minlength=support.size)
            self._merged = (support, probs)
        return self._merged

    @property
    def support(self) -> np.ndarray:
        return self._merge()[0]

    @property
    def probs(self) -> np.ndarray:
        return self._merge()[1]

    def mean(self) -> float:
        return float(self.weights @ self.bids)

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ fn(self.bids))

    def sample(self, rng: np.random.Generator) -> float:
        cdf = np.cumsum(self.weights)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return float(self.bids[min(k, self.bids.size - 1)])


# ---------------------------------------------------------------- tree ---


class TreeBank:
    """Vectorized copies of the cover-tree learner, one per start round.

    Actions are "slots": every leaf, followed by the good action of every
    internal node level by level.  Slot bids change each round; the bank
    only needs slot rewards.
    """

    def __init__(self, tree: CoverTree, T: int):
        self.tree = tree
        self.T = int(T)
        self.M = tree.depth
        self.n_leaves = tree.n_leaves
        self.offsets = np.cumsum([self.n_leaves] + [tree.n_nodes(i) for i in range(self.M)])
        self.n_actions = int(self.offsets[-1])
        # Per node coefficient sqrt(log K / (T delta)); eta = coef / U.
        self.coef: List[np.ndarray] = []
        self.child_parent: List[np.ndarray] = []
        self.starts: List[np.ndarray] = []
        self.counts: List[np.ndarray] = []
        for i in range(self.M):
            K = tree.n_children(i) + 1
            delta = min(tree.goodness(i), 1.0)
            coef = np.array([math.sqrt(math.log(k) / (self.T * clamp_delta(delta, int(k), self.T)))
                             for k in K])
            self.coef.append(coef)
            self.child_parent.append(tree.parent[i + 1])
            self.starts.append(tree.child_start[i][:-1])
            self.counts.append(tree.n_children(i))
        self.r_child: List[np.ndarray] = [np.zeros((0, tree.n_nodes(i + 1))) for i in range(self.M)]
        self.r_good: List[np.ndarray] = [np.zeros((0, tree.n_nodes(i))) for i in range(self.M)]
        self.u_now = 0.0
        self._n = 0
        self._eta_u = None
        self._eta_cache = []
        self._ec: List[np.ndarray] = []
        self._inv: List[np.ndarray] = []
        self._pg: List[np.ndarray] = []

    @property
    def n_instances(self) -> int:
        return self._n

    def spawn(self) -> None:
        for i in range(self.M):
            self.r_child[i] = np.vstack([self.r_child[i], np.zeros((1, self.r_child[i].shape[1]))])
            self.r_good[i] = np.vstack([self.r_good[i], np.zeros((1, self.r_good[i].shape[1]))])
        self._n += 1

    def _eta(self, i: int):
        if self._eta_u != self.u_now:
            self._eta_cache = [(c / self.u_now, (c / self.u_now)[p])
                               for c, p in zip(self.coef, self.child_parent)]
            self._eta_u = self.u_now
        return self._eta_cache[i]

    def _level_weights(self, i: int):
        """Unnormalized child and good weights of level ``i`` and their totals."""
        eta, eta_c = self._eta(i)
        zc = self.r_child[i] * eta_c
        zg = self.r_good[i] * eta
        # One shift per row is enough unless a whole node underflows.
        shift = np.maximum(zc.max(axis=1), zg.max(axis=1))[:, None]
        zc -= shift
        zg -= shift
        if zc.min(initial=0.0) < _EXP_FLOOR or zg.min(initial=0.0) < _EXP_FLOOR:
            seg = np.maximum(np.maximum.reduceat(zc, self.starts[i], axis=1), zg)
            zc -= np.repeat(seg, self.counts[i], axis=1)
            zg -= seg
        np.exp(zc, out=zc)
        np.exp(zg, out=zg)
        total = np.add.reduceat(zc, self.starts[i], axis=1) + zg
        return zc, zg, total

    def step(self, u: float, context=None) -> np.ndarray:
        self.u_now = max(self.u_now, float(u))
        n = self._n
        if self.M == 0:
            return np.ones((n, 1))
        self._ec, self._inv, self._pg = [], [], []
        out = np.empty((n, self.n_actions))
        mass = np.ones((n, 1))
        for i in range(self.M):
            ec, eg, total = self._level_weights(i)
            inv = 1.0 / total
            pg = eg * inv
            self._ec.append(ec)
            self._inv.append(inv)
            self._pg.append(pg)
            out[:, self.offsets[i]:self.offsets[i + 1]] = mass * pg
            mass = np.repeat(mass * inv, self.counts[i], axis=1) * ec
        out[:, : self.n_leaves] = mass
        return out

    def update(self, rewards) -> None:
        r = check_rewards(rewards, self.u_now)
        if self.M == 0:
            return
        below = r[None, : self.n_leaves]
        for i in range(self.M - 1, -1, -1):
            rg = r[self.offsets[i]:self.offsets[i + 1]]
            self.r_child[i] += below
            self.r_good[i] += rg[None, :]
            below = self._pg[i] * rg[None, :] + np.add.reduceat(
                self._ec[i] * below, self.starts[i], axis=1) * self._inv[i]


@functools.lru_cache(maxsize=8)
def cached_tree(L: float, M: int, size_cap: int) -> CoverTree:
    return build_tree(L, M, size_cap)


class TreePolicy:
    """Cover-tree policy for full-information feedback.

    The tree depth is the largest level up to ``min(floor(log2 sqrt T),
    depth_cap)`` whose cover fits under ``size_cap``; see
    :func:`~autobid.covers.select_depth`.
    """

    feedback = FULL

    def __init__(self, rule: PaymentRule, T: int, L: float = 1.0,
                 depth_cap: int = DEFAULT_DEPTH_CAP, size_cap: int = DEFAULT_SIZE_CAP,
                 restart: str = "sparse", depth: Optional[int] = None):
        self.rule = rule
        self.T = int(T)
        self.L = float(L)
        self.depth = select_depth(L, T, depth_cap, size_cap) if depth is None else int(depth)
        self.tree = cached_tree(self.L, self.depth, int(size_cap))
        self.bank = TreeBank(self.tree, self.T)
        self.learner = IntervalMeta(self.bank, self.T, restart)
        self.restart = restart
        self.depth_cap = depth_cap
        self.size_cap = size_cap
        self._round = None

    def metadata(self) -> dict:
        return {
            "policy": "tree",
            "lipschitz": self.L,
            "depth": self.depth,
            "depth_cap": self.depth_cap,
            "size_cap": self.size_cap,
            "leaves": self.tree.n_leaves,
            "restart_grid": self.restart,
            "restart_starts": int(len(self.learner.starts)),
        }

    def slot_bids(self, v: float, chi: float, psi: float) -> np.ndarray:
        """Guarded leaf bids followed by each internal node's good bid."""
        raw = self.tree.leaf_bids(v)
        leaf = _guarded(self.rule.q, v, chi, psi, raw)
        goods = [np.maximum.reduceat(leaf, self.tree.leaf_start[i][:-1])
                 for i in range(self.depth)]
        return np.concatenate([leaf] + goods)

    def step(self, v: float, chi: float, psi: float, u: float) -> BidDistribution:
        bids = self.slot_bids(v, chi, psi)
        probs = self.learner.step(u)
        self._round = (v, chi, psi, bids)
        return BidDistribution(bids, probs)

    def slot_rewards(self, d: float) -> np.ndarray:
        v, chi, psi, bids = self._round
        return _reward(self.rule.q, chi, psi, v, bids, d)

    def update(self, d: float) -> None:
        if self._round is None:
            raise RuntimeError("update called before step")
        self.learner.update(self.slot_rewards(d))
        self._round = None

    def goodness_gaps(self, d: float, u: float) -> List[np.ndarray]:
        """Per node ``r(g) - max_leaf r + 2**(3-i) U``; all entries must be >= 0."""
        v, chi, psi, bids = self._round
        r = _reward(self.rule.q, chi, psi, v, bids, d)
        leaf_r = r[: self.tree.n_leaves]
        gaps = []
        for i in range(self.depth):
            g = r[self.bank.offsets[i]:self.bank.offsets[i + 1]]
            best = np.maximum.reduceat(leaf_r, self.tree.leaf_start[i][:-1])
            gaps.append(g - best + self.tree.goodness(i) * u)
        return gaps


# -------------------------------------------------------------- bandit ---


def bucket_bandit_sizes(L: float, T: int):
    """Value buckets ``N = ceil(L^(3/4) T^(1/4))`` and bid levels ``K = ceil(T^(1/4) / L^(1/4))``."""
    N = int(math.ceil(L ** 0.75 * T ** 0.25 - 1e-9))
    K = int(math.ceil(T ** 0.25 / L ** 0.25 - 1e-9))
    return N, K


def bucket_index(v: float, N: int) -> int:
    """Bucket ``ceil(v N)`` in ``1..N``; 0 for ``v = 0``."""
    return min(int(math.ceil(v * N - 1e-12)), N) if v > 0 else 0


class BucketBanditPolicy:
    """Per-bucket bandit learners over bid levels ``j / K``.

    Bucket ``i`` stands for the value ``i / N``; guards and rewards use
    that value, so a bucket only ever sees rewards in ``[0, U]``.
    """

    feedback = BANDIT

    def __init__(self, rule: PaymentRule, T: int, L: float = 1.0):
        self.rule = rule
        self.T = int(T)
        self.L = float(L)
        self.N, self.K = bucket_bandit_sizes(self.L, self.T)
        self.levels = np.arange(1, self.K + 1) / self.K
        self.learners: Dict[int, ExpSix] = {}
        self.counts: Dict[int, int] = {}
        self._pending = None

    def metadata(self) -> dict:
        return {"policy": "bucket_bandit", "lipschitz": self.L, "buckets": self.N,
                "bid_levels": self.K}

    def step(self, v: float, chi: float, psi: float, u: float,
             rng: np.random.Generator) -> float:
        i = bucket_index(v, self.N)
        if i == 0:
            self._pending = ("zero",)
            return 0.0
        learner = self.learners.get(i)
        if learner is None:
            learner = self.learners[i] = ExpSix(self.K, self.T)
            self.counts[i] = 0
        learner.step(u)
        a = learner.sample(rng)
        v_tilde = i / self.N
        bid = float(_guarded(self.rule.q, v_tilde, chi, psi, self.levels[a]))
        self._pending = (i, a, v_tilde, chi, psi, learner.u_now)
        return bid

    def update(self, won: bool, price: float) -> None:
        if self._pending is None:
            raise RuntimeError("update called without a matching step")
        pending, self._pending = self._pending, None
        if pending[0] == "zero":
            return
        i, a, v_tilde, chi, psi, u = pending
        reward = (chi * v_tilde - psi * price) if won else 0.0
        self.learners[i].update(a, u - reward)
        self.counts[i] += 1


# ---------------------------------------------------------------- poly ---


class PolyPolicy:
    """Full-information bucket policy running every bucket every round.

    ``N = floor(L T)`` buckets and bid levels ``j / T``.  Each bucket owns an
    interval-wrapped Hedge (``delta = 1``).  Buckets are created the first
    time a value lands in them and replayed over the stored history, which
    gives exactly the state they would have had running from round 1.
    """

    feedback = FULL

    def __init__(self, rule: PaymentRule, T: int, L: float = 1.0,
                 restart: str = "sparse", n_levels: Optional[int] = None):
        self.rule = rule
        self.T = int(T)
        self.L = float(L)
        self.N = max(1, int(math.floor(self.L * self.T + 1e-9)))
        self.K = self.T if n_levels is None else int(n_levels)
        self.levels = np.arange(1, self.K + 1) / self.K
        self.restart = restart
        self.buckets: Dict[int, IntervalMeta] = {}
        self.history: List[tuple] = []
        self._round = None

    def metadata(self) -> dict:
        return {"policy": "poly", "lipschitz": self.L, "buckets": self.N,
                "bid_levels": self.K, "restart_grid": self.restart,
                "materialized_buckets": sorted(self.buckets)}

    def _new_bucket(self, i: int) -> IntervalMeta:
        meta = IntervalMeta(HedgeBank(self.K, self.T, 1.0), self.T, self.restart)
        v_tilde = i / self.N
        for chi, psi, u, d in self.history:
            meta.advance(u)
            meta.update(self._rewards(v_tilde, chi, psi, d))
        return meta

    def bucket_bids(self, i: int, chi: float, psi: float) -> np.ndarray:
        return _guarded(self.rule.q, i / self.N, chi, psi, self.levels)

    def _rewards(self, v_tilde, chi, psi, d) -> np.ndarray:
        # Levels ascend, so guarded bids are the levels up to the risky cut
        # followed by the safe bid, and wins are a contiguous range of the
        # prefix.  Same predicates and arithmetic as _guarded and _reward.
        q, levels = self.rule.q, self.levels
        cut = int(np.searchsorted(psi * levels, chi * v_tilde + TOL, side="right"))
        lo = min(int(np.searchsorted(levels, d - TOL, side="left")), cut)
        r = np.zeros(self.K)
        r[lo:cut] = chi * v_tilde - psi * _payment(q, levels[lo:cut], d)
        if cut < self.K:
            safe = float(_safe_bid(q, v_tilde, chi, psi))
            if safe >= d - TOL:
                r[cut:] = chi * v_tilde - psi * _payment(q, safe, d)
        return r

    def step(self, v: float, chi: float, psi: float, u: float) -> BidDistribution:
        i = bucket_index(v, self.N)
        if i and i not in self.buckets:
            self.buckets[i] = self._new_bucket(i)
        for meta in self.buckets.values():
            meta.advance(u)
        self._round = (chi, psi, u)
        if i == 0:
            return BidDistribution.point(0.0)
        return BidDistribution(self.bucket_bids(i, chi, psi), self.buckets[i].probs)

    def update(self, d: float) -> None:
        if self._round is None:
            raise RuntimeError("update called before step")
        chi, psi, u = self._round
        for k, meta in self.buckets.items():
            meta.update(self._rewards(k / self.N, chi, psi, d))
        self.history.append((chi, psi, u, d))
        self._round = None


# --------------------------------------------------------------- fixed ---


class FixedPolicy:
    """Bids ``f(v)`` every round; ``f`` is a constant or piecewise linear."""

    feedback = FULL

    def __init__(self, bid: Optional[float] = None,
                 points: Optional[Sequence[Sequence[float]]] = None):
        if (bid is None) == (points is None):
            raise ValueError("give exactly one of a constant bid or interpolation points")
        if bid is not None:
            if not 0.0 <= bid <= 1.0:
                raise ValueError("bid must lie in [0, 1]")
            self.fn = lambda v, b=float(bid): np.full(np.shape(v), b)
        else:
            pts = np.asarray(points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError("points must be (value, bid) pairs with increasing values")
            if np.any(pts < 0) or np.any(pts > 1):
                raise ValueError("points must lie in [0, 1]^2")
            self.fn = lambda v, p=pts: np.interp(v, p[:, 0], p[:, 1])
        self.bid = bid
        self.points = points

    def metadata(self) -> dict:
        return {"policy": "fixed", "bid": self.bid,
                "points": None if self.points is None else [list(p) for p in self.points]}

    def __call__(self, v):
        return self.fn(v)

    def step(self, v: float, chi: float, psi: float, u: float) -> BidDistribution:
        return BidDistribution.point(float(self.fn(v)))

    def update(self, d: float) -> None:
        pass
