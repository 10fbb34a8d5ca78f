"""Run loops for the primal/dual game and the exact-ROI wrapper.

Each round of :func:`run_primal_dual`:

1. the environment draws ``(v, d)``;
2. the dual reports ``(lam, mu)`` computed from earlier rounds and the
   primal scales ``chi, psi`` follow, with ``U`` their running max;
3. the primal policy bids; the bid is forced to 0 once less than one unit
   of budget remains, so the budget can never be overspent;
4. the auction resolves, then the policy and the dual learn.

:func:`run_exact_roi` switches between two primal pipelines.  The
constrained pipeline acts only while the accumulated value-minus-payment
is at least 1, which one round cannot use up; otherwise a pipeline with
``chi = psi = 1`` acts, whose guarded bids never lose ROI slack.  Hence
the ROI constraint holds on every prefix of every run.
"""

from __future__ import annotations

import dataclasses
import io
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from .core import TOL, ConstraintSpec, Objective, PaymentRule, _payment, _won, chi_psi
from .dual import DualState
from .environments import FiniteEnv
from .policies import BANDIT, FULL

CSV_COLUMNS = ("t", "v", "d", "bid", "won", "payment", "lambda", "mu", "chi", "psi",
               "u_cap", "budget_remaining", "roi_slack", "policy_tag", "cum_objective")

_FLOAT_FIELDS = ("v", "d", "bid", "payment", "gain", "lam", "mu", "chi", "psi", "u_cap",
                 "budget_remaining", "roi_slack", "cum_objective")


@dataclasses.dataclass
class RunTrace:
    """Per-round record of one run, stored column-wise."""

    v: np.ndarray
    d: np.ndarray
    bid: np.ndarray
    won: np.ndarray
    payment: np.ndarray
    gain: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    chi: np.ndarray
    psi: np.ndarray
    u_cap: np.ndarray
    budget_remaining: np.ndarray
    roi_slack: np.ndarray
    cum_objective: np.ndarray
    tag: List[str]
    budget: float
    mask_d: bool = False
    metadata: Dict = dataclasses.field(default_factory=dict)

    @classmethod
    def empty(cls, T: int, budget: float, mask_d: bool) -> "RunTrace":
        cols = {name: np.zeros(T) for name in _FLOAT_FIELDS}
        return cls(won=np.zeros(T, dtype=bool), tag=[""] * T, budget=budget,
                   mask_d=mask_d, **cols)

    @property
    def T(self) -> int:
        return self.v.size

    def to_csv(self, path=None) -> str:
        """CSV text with 12 significant digits; written to ``path`` if given."""
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        fmt = "{:.12g}".format
        for k in range(self.T):
            row = [
                str(k + 1), fmt(self.v[k]), "" if self.mask_d else fmt(self.d[k]),
                fmt(self.bid[k]), "1" if self.won[k] else "0", fmt(self.payment[k]),
                fmt(self.lam[k]), fmt(self.mu[k]), fmt(self.chi[k]), fmt(self.psi[k]),
                fmt(self.u_cap[k]), fmt(self.budget_remaining[k]), fmt(self.roi_slack[k]),
                self.tag[k], fmt(self.cum_objective[k]),
            ]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def split_rngs(seed: int):
    """Independent (environment, primal) generators derived from one seed."""
    env_ss, primal_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(primal_ss)


class _Ledger:
    """Running budget, ROI slack and objective of a run."""

    def __init__(self, trace: RunTrace, obj: Objective, rule: PaymentRule):
        self.trace = trace
        self.obj = obj
        self.q = rule.q
        self.spent = 0.0
        self.slack = 0.0
        self.cum = 0.0

    @property
    def remaining(self) -> float:
        return self.trace.budget - self.spent

    def resolve(self, k, v, d, bid, lam, mu, chi, psi, u, tag):
        x = bool(bid >= d - TOL)
        p = _payment(self.q, bid, d) if x else 0.0
        gain = float(self.obj.gain(x, v, p))
        self.spent += p
        self.slack += (v - p) if x else 0.0
        self.cum += gain
        tr = self.trace
        tr.v[k], tr.d[k], tr.bid[k], tr.won[k], tr.payment[k] = v, d, bid, x, p
        tr.gain[k], tr.lam[k], tr.mu[k], tr.chi[k], tr.psi[k] = gain, lam, mu, chi, psi
        tr.u_cap[k], tr.budget_remaining[k], tr.roi_slack[k] = u, self.remaining, self.slack
        tr.cum_objective[k], tr.tag[k] = self.cum, tag
        return x, p


def _dual_moments(dist, rule: PaymentRule, v: float, d: float):
    win = lambda b: _won(b, d).astype(float)
    xp = dist.expect(lambda b: win(b) * _payment(rule.q, b, d))
    return xp, v * dist.expect(win)


def run_primal_dual(env: FiniteEnv, policy, obj: Objective, rule: PaymentRule,
                    constraints: ConstraintSpec, T: int, seed: int,
                    dual: Optional[DualState] = None, dual_gradient: str = "realized",
                    on_round: Optional[Callable] = None) -> RunTrace:
    """Play ``T`` rounds of the primal policy against the OGD dual.

    ``on_round(t, policy, v, d, chi, psi, u)`` is called after the policy
    steps and before it learns, for debugging checks.
    """
    if policy.feedback not in (FULL, BANDIT):
        raise ValueError(f"unknown feedback mode {policy.feedback!r}")
    if dual_gradient not in ("realized", "expected"):
        raise ValueError(f"unknown dual gradient mode {dual_gradient!r}")
    if dual_gradient == "expected" and policy.feedback == BANDIT:
        raise ValueError("expected dual gradients need full-information feedback")
    dual = dual if dual is not None else DualState.for_horizon(constraints.rho, T)
    env_rng, rng = split_rngs(seed)
    vs, ds = env.sample_many(env_rng, T)
    trace = RunTrace.empty(T, constraints.budget(T), policy.feedback == BANDIT)
    book = _Ledger(trace, obj, rule)
    u = 0.0
    for k in range(T):
        v, d = float(vs[k]), float(ds[k])
        m = dual.step()
        chi, psi = chi_psi(obj, m)
        u = max(u, chi, psi)
        idle = book.remaining < 1.0
        dist = None
        if policy.feedback == FULL:
            dist = policy.step(v, chi, psi, u)
            bid = dist.sample(rng)
        else:
            bid = 0.0 if idle else policy.step(v, chi, psi, u, rng)
        if on_round is not None:
            on_round(k + 1, policy, v, d, chi, psi, u)
        if idle:
            bid = 0.0
        x, p = book.resolve(k, v, d, bid, m.lam, m.mu, chi, psi, u,
                            "idle" if idle else "primal")
        if policy.feedback == FULL:
            policy.update(d)
        elif not idle:
            policy.update(x, p)
        if dual_gradient == "expected" and not idle:
            dual.update_moments(*_dual_moments(dist, rule, v, d))
        else:
            dual.update(float(x), p, v)
    trace.metadata.update({
        "runner": "primal_dual", "seed": seed, "T": T, "rho": constraints.rho,
        "dual_step": dual.eta, "dual_cap": dual.cap, "dual_gradient": dual_gradient,
    })
    return trace


def run_exact_roi(env: FiniteEnv, a1, a2, obj: Objective, rule: PaymentRule,
                  constraints: ConstraintSpec, T: int, seed: int,
                  dual: Optional[DualState] = None,
                  on_round: Optional[Callable] = None) -> RunTrace:
    """Switch between the constrained pipeline ``a1`` and the slack pipeline ``a2``.

    Rounds with less than one unit of budget left bid 0.  Otherwise ``a1``
    (primal policy plus dual) acts when the ROI slack accumulated so far is
    at least 1 and ``a2`` (primal policy with ``chi = psi = 1``) acts
    otherwise.  Each pipeline only sees the rounds it plays.
    """
    for pol in (a1, a2):
        if pol.feedback not in (FULL, BANDIT):
            raise ValueError(f"unknown feedback mode {pol.feedback!r}")
    dual = dual if dual is not None else DualState.for_horizon(constraints.rho, T)
    env_rng, rng = split_rngs(seed)
    vs, ds = env.sample_many(env_rng, T)
    trace = RunTrace.empty(T, constraints.budget(T), BANDIT in (a1.feedback, a2.feedback))
    book = _Ledger(trace, obj, rule)
    u1 = 1.0
    for k in range(T):
        v, d = float(vs[k]), float(ds[k])
        m = dual.step()
        chi, psi = chi_psi(obj, m)
        if book.remaining < 1.0:
            book.resolve(k, v, d, 0.0, m.lam, m.mu, chi, psi, max(u1, chi, psi), "idle")
            continue
        if book.slack >= 1.0:
            pol, tag = a1, "A1"
            u1 = max(u1, chi, psi)
            u = u1
        else:
            pol, tag = a2, "A2"
            chi, psi, u = 1.0, 1.0, 1.0
        if pol.feedback == FULL:
            bid = pol.step(v, chi, psi, u).sample(rng)
        else:
            bid = pol.step(v, chi, psi, u, rng)
        if on_round is not None:
            on_round(k + 1, pol, v, d, chi, psi, u)
        x, p = book.resolve(k, v, d, bid, m.lam, m.mu, chi, psi, u, tag)
        if pol.feedback == FULL:
            pol.update(d)
        else:
            pol.update(x, p)
        if tag == "A1":
            dual.update(float(x), p, v)
    trace.metadata.update({
        "runner": "exact_roi", "seed": seed, "T": T, "rho": constraints.rho,
        "dual_step": dual.eta, "dual_cap": dual.cap, "dual_gradient": "realized",
    })
    return trace
