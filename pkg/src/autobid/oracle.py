"""Benchmark LP, regret metrics and brute-force probes.

The benchmark is the best distribution over a finite set of bidding
functions that respects the budget rate and the ROI constraint in
expectation:

    max  sum_f x_f V_f   s.t.  sum_f x_f P_f <= rho,  sum_f x_f ROI_f >= 0,

with ``x`` on the simplex.  With two inequality constraints and the
simplex equality every vertex has at most three nonzero weights, so
enumerating supports of size one to three finds the optimum exactly.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import TOL, Objective, PaymentRule, _payment, _won
from .environments import FiniteEnv
from .errors import CapacityError

FEAS_TOL = 1e-9
# Support enumeration is cubic; larger candidate sets go to a simplex solver.
ENUM_LIMIT = 400
BidMap = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclasses.dataclass
class OptSolution:
    value: float
    support: List[int]
    weights: List[float]
    budget_binding: bool
    roi_binding: bool
    payment: float = 0.0
    roi: float = 0.0
    n_candidates: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def bid_table(env: FiniteEnv, candidates: Sequence[BidMap]) -> np.ndarray:
    """Bids of each candidate at each atom; shape (n_candidates, n_atoms)."""
    rows = []
    for f in candidates:
        if callable(f):
            b = np.asarray(f(env.v), dtype=float)
            b = np.broadcast_to(b, env.v.shape)
        else:
            b = np.full(env.v.shape, float(f))
        if np.any(b < 0.0) or np.any(b > 1.0):
            raise ValueError("candidate bids must lie in [0, 1]")
        rows.append(b)
    return np.vstack(rows)


def stats_from_bids(env: FiniteEnv, bids: np.ndarray, rule: PaymentRule,
                    obj: Objective = Objective()) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Expected (objective, value, payment, ROI) per row of ``bids``."""
    win = _won(bids, env.d[None, :])
    pay = np.where(win, _payment(rule.q, bids, env.d[None, :]), 0.0)
    value = (win * env.v[None, :]) @ env.probs
    payment = pay @ env.probs
    roi = value - payment
    objective = value if obj.kind == "value" else value - obj.nu * payment
    return objective, value, payment, roi


def expected_value_payment(env: FiniteEnv, f: BidMap, rule: PaymentRule) -> Tuple[float, float, float]:
    """``(V_f, P_f, ROI_f)`` of one bidding function."""
    _, value, payment, roi = stats_from_bids(env, bid_table(env, [f]), rule)
    return float(value[0]), float(payment[0]), float(roi[0])


def lipschitz_candidates(env: FiniteEnv, L: float,
                         bid_levels: Optional[Sequence[float]] = None,
                         limit: int = 200_000) -> np.ndarray:
    """Bid tables of all ``L``-Lipschitz maps from value atoms to bid levels.

    Bid levels default to the competing-bid atoms together with 0 and 1.
    Lowering a bid to the nearest atom below keeps its win pattern and cuts
    its payment, so the set is exact whenever that rounding preserves the
    Lipschitz bound (atom spacing at most ``L`` times value spacing);
    otherwise it is a subset and the LP value a lower bound.  Returns an
    array (n_candidates, n_atoms).
    """
    values = env.value_atoms()
    levels = np.unique(np.concatenate([env.d_atoms(), [0.0, 1.0]])
                       if bid_levels is None else np.asarray(bid_levels, float))
    partial = [np.array([b]) for b in levels]
    for k in range(1, values.size):
        grown = []
        for row in partial:
            ok = np.all(np.abs(levels[:, None] - row[None, :])
                        <= L * (values[k] - values[:k])[None, :] + TOL, axis=1)
            grown.extend(np.append(row, b) for b in levels[ok])
        partial = grown
        if len(partial) > limit:
            raise CapacityError(f"more than {limit} Lipschitz candidates")
    maps = np.array(partial).reshape(len(partial), values.size)
    idx = np.searchsorted(values, env.v)
    return maps[:, idx]


def solve_lp(obj: np.ndarray, pay: np.ndarray, roi: np.ndarray, rho: float) -> OptSolution:
    """Best vertex of the mixture LP by support enumeration."""
    obj, pay, roi = (np.asarray(a, dtype=float) for a in (obj, pay, roi))
    n = obj.size
    if n == 0:
        raise ValueError("empty candidate set")
    keep = _pareto(obj, pay, roi)
    o, p, r = obj[keep], pay[keep], roi[keep]
    m = o.size
    if m > ENUM_LIMIT:
        return _solve_highs(obj, pay, roi, rho, keep)
    best = (-math.inf, [], [])

    def consider(val, support, weights):
        nonlocal best
        if val > best[0] + 1e-15:
            best = (val, support, weights)

    ok = (p <= rho + FEAS_TOL) & (r >= -FEAS_TOL)
    if ok.any():
        k = int(np.argmax(np.where(ok, o, -np.inf)))
        consider(o[k], [k], [1.0])

    if m >= 2:
        i, j = np.triu_indices(m, 1)
        for g_i, g_j, rhs in ((p[i], p[j], rho), (r[i], r[j], 0.0)):
            den = g_i - g_j
            with np.errstate(divide="ignore", invalid="ignore"):
                a = (rhs - g_j) / den
            a = np.where(np.abs(den) > 1e-15, a, np.nan)
            valid = (a >= -FEAS_TOL) & (a <= 1 + FEAS_TOL)
            a = np.clip(a, 0.0, 1.0)
            mp = a * p[i] + (1 - a) * p[j]
            mr = a * r[i] + (1 - a) * r[j]
            valid &= (mp <= rho + FEAS_TOL) & (mr >= -FEAS_TOL)
            if valid.any():
                val = np.where(valid, a * o[i] + (1 - a) * o[j], -np.inf)
                k = int(np.argmax(val))
                consider(val[k], [i[k], j[k]], [a[k], 1 - a[k]])

    if m >= 3:
        for tri in _triples(m):
            i, j, k = tri.T
            # Solve x_i + x_j + x_k = 1, sum x P = rho, sum x ROI = 0.
            A = np.stack([np.ones((len(i), 3)),
                          np.stack([p[i], p[j], p[k]], 1),
                          np.stack([r[i], r[j], r[k]], 1)], 1)
            det = np.linalg.det(A)
            good = np.abs(det) > 1e-13
            if not good.any():
                continue
            rhs = np.broadcast_to(np.array([1.0, rho, 0.0]), (int(good.sum()), 3))
            x = np.linalg.solve(A[good], rhs[..., None])[..., 0]
            feasible = np.all(x >= -FEAS_TOL, axis=1)
            if feasible.any():
                x = np.clip(x, 0.0, None)
                x /= x.sum(axis=1, keepdims=True)
                ii, jj, kk = i[good], j[good], k[good]
                val = np.where(feasible, x[:, 0] * o[ii] + x[:, 1] * o[jj] + x[:, 2] * o[kk], -np.inf)
                q = int(np.argmax(val))
                consider(val[q], [ii[q], jj[q], kk[q]], list(x[q]))

    if best[0] == -math.inf:
        raise ValueError("no feasible mixture; include the zero bid among the candidates")
    val, support, weights = best
    support_orig = [int(keep[s]) for s in support]
    w = np.array(weights, dtype=float)
    mp = float(w @ pay[support_orig])
    mr = float(w @ roi[support_orig])
    pairs = [(s, float(x)) for s, x in zip(support_orig, w) if x > 0.0]
    return OptSolution(
        value=float(val),
        support=[s for s, _ in pairs],
        weights=[x for _, x in pairs],
        budget_binding=abs(mp - rho) <= 1e-7,
        roi_binding=abs(mr) <= 1e-7,
        payment=mp,
        roi=mr,
        n_candidates=n,
    )


def _solve_highs(obj, pay, roi, rho, keep) -> OptSolution:
    from scipy.optimize import linprog

    o, p, r = obj[keep], pay[keep], roi[keep]
    res = linprog(-o, A_ub=np.vstack([p, -r]), b_ub=[rho, 0.0],
                  A_eq=np.ones((1, o.size)), b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise ValueError(f"LP solver failed: {res.message}")
    x = np.clip(res.x, 0.0, None)
    nz = np.flatnonzero(x > 1e-12)
    w = x[nz] / x[nz].sum()
    mp, mr = float(w @ p[nz]), float(w @ r[nz])
    return OptSolution(
        value=float(w @ o[nz]),
        support=[int(keep[k]) for k in nz],
        weights=[float(v) for v in w],
        budget_binding=abs(mp - rho) <= 1e-7,
        roi_binding=abs(mr) <= 1e-7,
        payment=mp,
        roi=mr,
        n_candidates=obj.size,
    )


def _pareto(obj, pay, roi) -> np.ndarray:
    """Indices of candidates that no other candidate weakly improves on.

    Swapping a dominated candidate for its dominator keeps any mixture
    feasible and does not lower its objective.  Exact duplicates keep
    their first occurrence.
    """
    n = obj.size
    _, first = np.unique(np.stack([obj, pay, roi], 1), axis=0, return_index=True)
    first = np.sort(first)
    o, p, r = obj[first], pay[first], roi[first]
    if n > 20_000:
        return first
    weak = (o[None, :] >= o[:, None]) & (p[None, :] <= p[:, None]) & (r[None, :] >= r[:, None])
    strict = (o[None, :] > o[:, None]) | (p[None, :] < p[:, None]) | (r[None, :] > r[:, None])
    return first[~np.any(weak & strict, axis=1)]


def _triples(m: int, chunk: int = 200_000):
    buf = []
    for t in itertools.combinations(range(m), 3):
        buf.append(t)
        if len(buf) == chunk:
            yield np.array(buf)
            buf = []
    if buf:
        yield np.array(buf)


def solve_opt(env: FiniteEnv, candidates, rule: PaymentRule,
              obj: Objective = Objective(), rho: float = 1.0) -> OptSolution:
    """Benchmark value per round over a finite candidate set.

    ``candidates`` is a sequence of bidding functions (callables or
    constant bids) or a precomputed bid table (n_candidates, n_atoms).
    """
    if isinstance(candidates, np.ndarray) and candidates.ndim == 2:
        bids = candidates
    else:
        if len(candidates) == 0:
            raise ValueError("empty candidate set")
        bids = bid_table(env, candidates)
    objective, _, payment, roi = stats_from_bids(env, bids, rule, obj)
    return solve_lp(objective, payment, roi, rho)


def grid_search_lp(obj, pay, roi, rho: float, step: float = 5e-3, edge_step: float = 1e-4,
                   tol: float = 1e-11, max_rounds: int = 400) -> float:
    """Independent check of :func:`solve_lp` by searching mixture weights.

    Every triple of candidates (pairs and singletons are its faces) is
    scanned on a simplex grid of the given step, with the edges of the
    simplex scanned more finely.  The best feasible point is then refined
    on a 41 x 41 local grid: when the best local point sits on the window
    border the window moves, otherwise the spacing shrinks fourfold.  The
    search never solves a linear system.
    """
    obj, pay, roi = (np.asarray(a, dtype=float) for a in (obj, pay, roi))
    n = obj.size
    best = -math.inf
    groups = list(itertools.combinations(range(n), min(3, n)))
    n_grid = int(round(1.0 / step))
    a, b = np.meshgrid(np.arange(n_grid + 1), np.arange(n_grid + 1), indexing="ij")
    mask = a + b <= n_grid
    line = np.linspace(0.0, 1.0, int(round(1.0 / edge_step)) + 1)[:, None]
    zero = np.zeros_like(line)
    base = np.vstack([np.stack([a[mask], b[mask]], 1) / n_grid,
                      np.hstack([line, zero]), np.hstack([zero, line]),
                      np.hstack([line, 1.0 - line])])
    offs = np.arange(-20, 21)
    da, db = (x.ravel() for x in np.meshgrid(offs, offs, indexing="ij"))
    border = (np.abs(da) == 20) | (np.abs(db) == 20)
    for g in groups:
        g = list(g) + [g[-1]] * (3 - len(g))
        O, P, R = obj[g], pay[g], roi[g]

        def evaluate(w2):
            w = np.column_stack([w2, 1.0 - w2.sum(axis=1)])
            ok = (w >= 0.0).all(axis=1) & (w @ P <= rho + 1e-12) & (w @ R >= -1e-12)
            return np.where(ok, w @ O, -np.inf)

        vals = evaluate(base)
        k = int(np.argmax(vals))
        if vals[k] == -math.inf:
            continue
        centre, incumbent, h = base[k], vals[k], step
        for _ in range(max_rounds):
            if h < tol:
                break
            pts = centre[None, :] + h * np.stack([da, db], 1)
            v = evaluate(pts)
            q = int(np.argmax(v))
            if v[q] > incumbent:
                incumbent, centre = v[q], pts[q]
                if border[q]:
                    continue
            h /= 4.0
        best = max(best, incumbent)
    return best


@dataclasses.dataclass
class MetricsReport:
    cum_objective: float
    opt_per_round: float
    regret: float
    max_roi_violation: float
    min_roi_slack: float
    budget_used: float
    budget: float
    worst_interval_shortfall: float
    worst_interval: Tuple[int, int]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def metrics(gains: np.ndarray, roi_slack: np.ndarray, payments: np.ndarray,
            opt_per_round: float, budget: float) -> MetricsReport:
    """Summary of one trace against ``T * OPT``."""
    gains = np.asarray(gains, dtype=float)
    T = gains.size
    shortfall, interval = _max_subarray(opt_per_round - gains)
    return MetricsReport(
        cum_objective=float(gains.sum()),
        opt_per_round=float(opt_per_round),
        regret=float(T * opt_per_round - gains.sum()),
        max_roi_violation=float(max(0.0, -np.min(roi_slack))) if T else 0.0,
        min_roi_slack=float(np.min(roi_slack)) if T else 0.0,
        budget_used=float(np.sum(payments)),
        budget=float(budget),
        worst_interval_shortfall=shortfall,
        worst_interval=interval,
    )


def _max_subarray(x: np.ndarray) -> Tuple[float, Tuple[int, int]]:
    """Largest sum over contiguous rounds, with its 1-based closed interval."""
    best, best_iv = -math.inf, (0, 0)
    run, start = 0.0, 0
    for t, val in enumerate(x):
        if run <= 0.0:
            run, start = val, t
        else:
            run += val
        if run > best:
            best, best_iv = run, (start + 1, t + 1)
    return float(best) if x.size else 0.0, best_iv


def interval_regret_probe(rewards: np.ndarray, dists: np.ndarray,
                          max_work: int = 2 * 10**9) -> Tuple[float, Tuple[int, int]]:
    """Largest regret against the best fixed action over any interval.

    ``rewards`` and ``dists`` are (T, K).  Returns the value and the
    1-based closed interval attaining it.
    """
    rewards = np.asarray(rewards, dtype=float)
    dists = np.asarray(dists, dtype=float)
    T, K = rewards.shape
    if T * T * K > max_work:
        raise CapacityError("interval probe too large")
    C = np.vstack([np.zeros(K), np.cumsum(rewards, axis=0)])
    A = np.concatenate([[0.0], np.cumsum(np.sum(rewards * dists, axis=1))])
    best, arg = -math.inf, (1, 1)
    for s in range(T):
        reg = (C[s + 1:] - C[s]).max(axis=1) - (A[s + 1:] - A[s])
        k = int(np.argmax(reg))
        if reg[k] > best:
            best, arg = float(reg[k]), (s + 1, s + k + 1)
    return best, arg


def beta_alpha_diagnostic(env: FiniteEnv, f_beta: BidMap, rule: PaymentRule,
                          rho: float) -> dict:
    """Slack of the mixture ``f_beta`` w.p. ``rho`` and the zero bid otherwise.

    ``beta`` is the expected value-minus-payment of ``f_beta`` and
    ``alpha = rho * beta``.  The mixture should earn ROI at least alpha and
    pay at most ``rho - alpha``.
    """
    _, pay, roi = expected_value_payment(env, f_beta, rule)
    _, zero_pay, zero_roi = expected_value_payment(env, 0.0, rule)
    beta = roi
    alpha = rho * beta
    mix_roi = rho * roi + (1.0 - rho) * zero_roi
    mix_pay = rho * pay + (1.0 - rho) * zero_pay
    return {
        "beta_measured": beta,
        "alpha_implied": alpha,
        "mixture_roi": mix_roi,
        "mixture_payment": mix_pay,
        "roi_ok": bool(mix_roi >= alpha - FEAS_TOL),
        "payment_ok": bool(mix_pay <= rho - alpha + FEAS_TOL),
    }
