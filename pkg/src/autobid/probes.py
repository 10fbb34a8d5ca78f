"""Invariant suites run by the ``probe`` command and the acceptance tests.

Each suite returns a :class:`SuiteResult`.  Default sizes are small enough
for a quick ``probe`` run; the acceptance tests call the same functions
with their full sizes.
"""

from __future__ import annotations

import dataclasses
import math
import time
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .core import TOL, PaymentRule, _guarded, _is_risky, _reward, _safe_bid
from .covers import CoverGrid, _assign_parents, build_cover, build_tree, dominate, sup_distance
from .environments import (bandit_lb, bandit_lb_grid, bandit_lb_masses, bandit_lb_opt_bound,
                           product)
from .errors import CapacityError
from .learners import Hedge, HedgeBank, IntervalMeta
from .oracle import lipschitz_candidates, solve_opt
from .policies import TreePolicy

# Arithmetic slack allowed on top of exact probability-one bounds.
BOUND_SLACK = 1e-9


@dataclasses.dataclass
class SuiteResult:
    name: str
    checked: int
    violations: int
    detail: str = ""
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: {self.checked} checks, {self.violations} violations"
                f" ({self.seconds:.1f}s){' - ' + self.detail if self.detail else ''}")


def _timed(fn: Callable[..., SuiteResult]) -> Callable[..., SuiteResult]:
    def run(*args, **kwargs) -> SuiteResult:
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# ----------------------------------------------------------- safe bids ---


def _random_rules(rng, n) -> np.ndarray:
    """Per-tuple q: first, second or a random mixed rule."""
    kind = rng.integers(0, 3, n)
    return np.where(kind == 0, 1.0, np.where(kind == 1, 0.0, rng.random(n)))


@_timed
def safe_bid_suite(n_tuples: int = 2000, n_grid: int = 1000, seed: int = 0,
                   chunk: int = 1000) -> SuiteResult:
    """Safe-bid conditions on random (rule, v, chi, psi, b) over a d-grid.

    Checks per tuple: the safe bid never earns a negative reward; the
    analytic risky test agrees with the grid minimum (the grid includes
    ``d = b``, where the worst case sits); a risky bid is dominated by the
    safe bid at every d; the guarded bid never earns a negative reward.
    """
    rng = np.random.default_rng(seed)
    q = _random_rules(rng, n_tuples)
    v = rng.random(n_tuples)
    chi = 1.0 + 2.0 * rng.random(n_tuples)
    psi = np.where(rng.random(n_tuples) < 0.05, 0.0, 3.0 * rng.random(n_tuples))
    b = rng.random(n_tuples)
    base = np.linspace(0.0, 1.0, n_grid)
    bad = {"safe": 0, "analytic": 0, "dominance": 0, "guarded": 0}
    for s in range(0, n_tuples, chunk):
        sl = slice(s, min(s + chunk, n_tuples))
        qq, vv, cc, pp, bb = (x[sl, None] for x in (q, v, chi, psi, b))
        d = np.hstack([np.broadcast_to(base, (bb.shape[0], n_grid)), bb])
        safe = np.where(qq == 1.0, 0.0, np.where(pp > 0, np.minimum(cc * vv / np.where(
            pp > 0, pp, 1.0), 1.0), 1.0))
        r_safe = _reward(qq, cc, pp, vv, safe, d)
        r_b = _reward(qq, cc, pp, vv, bb, d)
        risky_grid = r_b.min(axis=1) < -TOL
        risky = _is_risky(vv, cc, pp, bb)[:, 0]
        guarded = np.where(risky[:, None], safe, bb)
        bad["safe"] += int(np.sum(r_safe.min(axis=1) < -TOL))
        bad["analytic"] += int(np.sum(risky_grid != risky))
        bad["dominance"] += int(np.sum(risky & np.any(r_safe < r_b - TOL, axis=1)))
        bad["guarded"] += int(np.sum(_reward(qq, cc, pp, vv, guarded, d).min(axis=1) < -TOL))
    # The scalar helpers must match the vectorized formulas used above.
    for k in range(min(n_tuples, 200)):
        ref = 0.0 if q[k] == 1.0 else (min(chi[k] * v[k] / psi[k], 1.0) if psi[k] > 0 else 1.0)
        if float(_safe_bid(q[k], v[k], chi[k], psi[k])) != ref:
            bad["safe"] += 1
        g = float(_guarded(q[k], v[k], chi[k], psi[k], b[k]))
        if g != (ref if psi[k] * b[k] > chi[k] * v[k] + TOL else b[k]):
            bad["guarded"] += 1
    total = sum(bad.values())
    detail = ", ".join(f"{k}={n}" for k, n in bad.items() if n)
    return SuiteResult("safe_bids", n_tuples * (n_grid + 1), total, detail)


# -------------------------------------------------------------- covers ---


def random_lipschitz(rng: np.random.Generator, L: float, n_breaks: int = 8):
    """Random piecewise-linear ``L``-Lipschitz map into ``[0, 1]`` and its knots."""
    knots = np.concatenate([[0.0], np.sort(rng.random(n_breaks)), [1.0]])
    slopes = rng.uniform(-L, L, knots.size - 1)
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    # Shift into [0, 1]; if the range is too wide, fold by clipping, which
    # keeps the Lipschitz bound.
    vals = vals - vals.min() + rng.random() * max(0.0, 1.0 - np.ptp(vals))
    vals = np.clip(vals, 0.0, 1.0)
    return (lambda x, k=knots, y=vals: np.interp(x, k, y)), knots


@_timed
def cover_suite(n_functions: int = 100, levels: Sequence[int] = (0, 1, 2, 3, 4),
                Ls: Sequence[float] = (1.0, 2.0, 4.0), n_eval: int = 1000,
                seed: int = 0) -> SuiteResult:
    """Sandwich ``f <= f' <= f + 2**-i`` for the dominating cover member."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n_eval)
    checked = bad = 0
    worst = -math.inf
    for L in Ls:
        for i in levels:
            grid = CoverGrid(L, i)
            for _ in range(n_functions):
                f, knots = random_lipschitz(rng, L)
                try:
                    lv = dominate(f, grid, knots=knots)
                except ValueError:
                    bad += 1
                    continue
                fx = f(x)
                fp = (np.ones_like(x) if i == 0
                      else lv[grid.cell_of(x)] * grid.delta_b)
                gap = fp - fx
                worst = max(worst, float(gap.max() - 2.0 ** -i))
                checked += 1
                if gap.min() < -BOUND_SLACK or gap.max() > 2.0 ** -i + BOUND_SLACK:
                    bad += 1
    return SuiteResult("cover_sandwich", checked, bad, f"worst excess over radius {worst:.3g}")


@_timed
def tree_suite(Ls: Sequence[float] = (1.0,), max_depth: int = 2) -> SuiteResult:
    """Exhaustive parent distances and sibling-leaf diameters."""
    checked = bad = 0
    notes = []
    for L in Ls:
        for M in range(max_depth + 1):
            try:
                tree = build_tree(L, M)
            except CapacityError as exc:
                notes.append(f"L={L} M={M}: {exc}")
                continue
            for i in range(1, M + 1):
                d = sup_distance(tree.levels[i], tree.grids[i],
                                 tree.levels[i - 1][tree.parent[i]], tree.grids[i - 1])
                checked += d.size
                bad += int(np.sum(d > 2.0 ** (-i + 1) + BOUND_SLACK))
            leaves = tree.leaf_table  # (cells, n_leaves)
            for i in range(M):
                starts = tree.leaf_start[i][:-1]
                hi = np.maximum.reduceat(leaves, starts, axis=1)
                lo = np.minimum.reduceat(leaves, starts, axis=1)
                diam = (hi - lo).max(axis=0)
                checked += diam.size
                bad += int(np.sum(diam > 2.0 ** (-i + 3) + BOUND_SLACK))
    return SuiteResult("tree_structure", checked, bad, "; ".join(notes))


def random_members(rng: np.random.Generator, grid: CoverGrid, n: int) -> np.ndarray:
    """Random members of a cover level as lazy walks on the bid levels."""
    steps = rng.integers(-1, 2, (n, grid.n_cells - 1))
    rows = np.empty((n, grid.n_cells), dtype=np.int64)
    rows[:, 0] = rng.integers(0, grid.n_steps + 1, n)
    for c in range(1, grid.n_cells):
        rows[:, c] = np.clip(rows[:, c - 1] + steps[:, c - 1], 0, grid.n_steps)
    return rows


@_timed
def deep_parent_suite(L: float = 1.0, level: int = 3, n_samples: int = 10_000,
                      seed: int = 0) -> SuiteResult:
    """Parent distances for sampled members of a level too large to enumerate.

    Each sample gets the parent the tree builder would assign from the
    enumerated level above it.
    """
    rng = np.random.default_rng(seed)
    fine, coarse = CoverGrid(L, level), CoverGrid(L, level - 1)
    rows = random_members(rng, fine, n_samples)
    coarse_levels = build_cover(L, level - 1).levels.astype(np.int64)
    parent = _assign_parents(rows, fine, coarse_levels, coarse)
    d = sup_distance(rows, fine, coarse_levels[parent], coarse)
    bad = int(np.sum(d > 2.0 ** (-level + 1) + BOUND_SLACK))
    return SuiteResult("deep_parents", int(d.size), bad,
                       f"level {level} of {fine.size()} members sampled")


@_timed
def goodness_suite(n_rounds: int = 1000, seed: int = 0, L: float = 1.0,
                   depth: int = 2) -> SuiteResult:
    """Every node's good action is within ``2**(3-i) U`` of each of its leaves."""
    rng = np.random.default_rng(seed)
    checked = bad = 0
    rules = [PaymentRule.first(), PaymentRule.second(), PaymentRule.mixed(0.5)]
    for k, rule in enumerate(rules):
        pol = TreePolicy(rule, max(n_rounds, 16), L, depth=depth)
        u = 1.0
        for _ in range(n_rounds // len(rules) + (k < n_rounds % len(rules))):
            lam, mu = rng.exponential(0.5, 2)
            chi, psi = 1.0 + mu, lam + mu
            u = max(u, chi, psi)
            v, d = rng.random(), rng.random()
            pol.step(v, chi, psi, u)
            for g in pol.goodness_gaps(d, u):
                checked += g.size
                bad += int(np.sum(g < -BOUND_SLACK))
            pol.update(d)
    return SuiteResult("tree_goodness", checked, bad)


# --------------------------------------------------------- hedge fuzz ---


def _ranges(rng, T: int) -> np.ndarray:
    """Nondecreasing random ranges in ``[1, 5]``."""
    jumps = np.where(rng.random(T) < 0.05, rng.random(T), 0.0)
    return np.minimum(1.0 + rng.random() + np.cumsum(jumps), 5.0)


def adversarial_rewards(rng, strategy: str, probs: Optional[np.ndarray], u: float, K: int,
                        t: int, T: int, state: dict) -> np.ndarray:
    """One reward vector in ``[0, u]`` from a named adversary."""
    if strategy == "iid":
        return u * rng.random(K)
    if strategy == "anti":
        # Pay the action the learner trusts least.
        r = np.zeros(K)
        r[int(np.argmin(probs))] = u
        return r
    if strategy == "trap":
        # Starve the learner's favourite, pay everyone else.
        r = np.full(K, u)
        r[int(np.argmax(probs))] = 0.0
        return r
    if strategy == "switch":
        if t == 0 or rng.random() < 4.0 / T:
            state["lead"] = int(rng.integers(K))
        r = 0.3 * u * rng.random(K)
        r[state["lead"]] = u
        return r
    raise ValueError(f"unknown adversary {strategy!r}")


STRATEGIES = ("iid", "anti", "trap", "switch")


def _enforce_good(r: np.ndarray, g: int, delta: float, u: float) -> np.ndarray:
    r = r.copy()
    r[g] = min(u, max(r[g], r.max() - delta * u))
    return r


@_timed
def hedge_fuzz_suite(n_sequences: int = 100, T: int = 500, K: int = 8,
                     deltas: Sequence[float] = (0.05, 0.2), seed: int = 0) -> SuiteResult:
    """Prefix regret of Hedge against ``4 U_tau sqrt(T delta log K)`` at every prefix."""
    rng = np.random.default_rng(seed)
    checked = bad = 0
    worst = -math.inf
    for n in range(n_sequences):
        delta = deltas[n % len(deltas)]
        strategy = STRATEGIES[(n // len(deltas)) % len(STRATEGIES)]
        h = Hedge(K, T, delta)
        U = _ranges(rng, T)
        g = int(rng.integers(K))
        cum = np.zeros(K)
        gained = 0.0
        state: dict = {}
        for t in range(T):
            p = h.step(U[t])
            r = _enforce_good(adversarial_rewards(rng, strategy, p, U[t], K, t, T, state),
                              g, delta, U[t])
            h.update(r)
            cum += r
            gained += float(p @ r)
            bound = 4.0 * U[t] * math.sqrt(T * h.delta * math.log(K))
            excess = cum.max() - gained - bound
            worst = max(worst, excess / bound)
            checked += 1
            bad += excess > BOUND_SLACK
    return SuiteResult("hedge_bound", checked, int(bad),
                       f"max regret/bound - 1 = {worst:.3f}")


@_timed
def interval_suite(n_instances: int = 10, T: int = 300, K: int = 5,
                   seed: int = 0) -> SuiteResult:
    """Interval regret of the restart mixture on every interval ``[t1, t2]``.

    Bound per interval: ``4 U_t2 sqrt(T log T) + 4 U_t2 sqrt(T log K)``,
    the meta term plus the sub-learner's prefix bound with ``delta = 1``.
    """
    rng = np.random.default_rng(seed)
    checked = bad = 0
    worst = -math.inf
    for n in range(n_instances):
        strategy = STRATEGIES[n % len(STRATEGIES)]
        meta = IntervalMeta(HedgeBank(K, T, 1.0), T, "full")
        U = _ranges(rng, T)
        R = np.zeros((T, K))
        gains = np.zeros(T)
        state: dict = {}
        for t in range(T):
            q = meta.step(U[t])
            R[t] = adversarial_rewards(rng, strategy, q, U[t], K, t, T, state)
            gains[t] = q @ R[t]
            meta.update(R[t])
        C = np.vstack([np.zeros(K), np.cumsum(R, axis=0)])
        A = np.concatenate([[0.0], np.cumsum(gains)])
        coef = 4.0 * (math.sqrt(T * math.log(T)) + math.sqrt(T * math.log(K)))
        for s in range(T):
            reg = (C[s + 1:] - C[s]).max(axis=1) - (A[s + 1:] - A[s])
            bound = coef * U[s:]
            worst = max(worst, float(np.max(reg / bound)) - 1.0)
            checked += reg.size
            bad += int(np.sum(reg > bound + BOUND_SLACK))
    return SuiteResult("interval_bound", checked, bad, f"max regret/bound - 1 = {worst:.3f}")


# -------------------------------------------------------------- masses ---


@_timed
def masses_suite(T: int = 64, tol: float = 1e-9) -> SuiteResult:
    """Exact base masses and per-variant OPT against ``13/16 + 3 eps / 32``."""
    checked = bad = 0
    notes = []
    base = dict(bandit_lb_masses(T))
    K, eps = bandit_lb_grid(T)
    for atom, want in ((Fraction(0), Fraction(3, 4)), (Fraction(1, 3), Fraction(3, 44))):
        checked += 1
        if base.get(atom) != want:
            bad += 1
            notes.append(f"P(d={atom}) = {base.get(atom)}, expected {want}")
    bound = bandit_lb_opt_bound(T)
    for j in sorted({0, K // 2, K - 1}):
        env = bandit_lb(T, j)
        opt = solve_opt(env, lipschitz_candidates(env, 1.0), PaymentRule.first(),
                        rho=0.25).value
        checked += 1
        if opt < bound - tol:
            bad += 1
            notes.append(f"OPT_{j} = {opt:.12g} < {bound:.12g}")
    return SuiteResult("lower_bound_masses", checked, bad, "; ".join(notes))


SUITES: Dict[str, Callable[[], SuiteResult]] = {
    "safe_bids": safe_bid_suite,
    "covers": cover_suite,
    "tree": tree_suite,
    "deep_parents": deep_parent_suite,
    "goodness": goodness_suite,
    "hedge": hedge_fuzz_suite,
    "interval": interval_suite,
    "masses": masses_suite,
}


def run_all(names: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    return [SUITES[n]() for n in (names or SUITES)]
