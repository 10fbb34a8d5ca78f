"""Experiment configuration: a YAML document with nested sections.

Canonical layout (every key optional except where noted)::

    env:
      kind: product          # point_mass | discrete | product | tight_beta | bandit_lb
      values: [0.25, 0.5, 0.75, 1.0]
      value_probs: [0.25, 0.25, 0.25, 0.25]
      bids: [0.0, 0.25, 0.5, 0.75, 1.0]
      bid_probs: [0.2, 0.2, 0.2, 0.2, 0.2]
    policy:
      kind: poly             # tree | bucket_bandit | poly | fixed
      lipschitz: 1.0
      depth_cap: 3
      restart: sparse        # full | sparse | none
    objective: {kind: value, nu: 1.0}
    payment: {rule: first, q: 1.0}
    constraints: {rho: 0.5, exact_roi: false}
    dual: {step: null, cap: null, gradient: realized}
    T: 1000
    seeds: [0, 1, 2]
    horizons: [1000, 4000]   # sweep only
    out: results

Environment keys by kind: ``point_mass`` takes ``v, d``; ``discrete``
takes ``v, d, probs`` (joint atoms); ``product`` the four lists above;
``tight_beta`` takes ``beta``; ``bandit_lb`` takes optional ``j`` and
``v`` and is rebuilt for every horizon.  A null dual step means
``1 / sqrt(T)``.  :func:`render` writes the canonical form and
``parse(render(c)) == c`` for every valid config.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Any, Dict, List, Optional

import yaml

from .core import QUASI_LINEAR, VALUE, ConstraintSpec, Objective, PaymentRule
from .covers import DEFAULT_DEPTH_CAP
from .dual import DualState
from .environments import (FiniteEnv, bandit_lb, bandit_lb_grid, discrete_joint, point_mass,
                           product, tight_beta)
from .errors import ConfigError
from .policies import BucketBanditPolicy, FixedPolicy, PolyPolicy, TreePolicy

ENV_KINDS = ("point_mass", "discrete", "product", "tight_beta", "bandit_lb")
POLICY_KINDS = ("tree", "bucket_bandit", "poly", "fixed")
RESTART_MODES = ("full", "sparse", "none")
RULES = ("first", "second", "mixed")
GRADIENTS = ("realized", "expected")

_ENV_FIELDS = {
    "point_mass": ("v", "d"),
    "discrete": ("v", "d", "probs"),
    "product": ("values", "value_probs", "bids", "bid_probs"),
    "tight_beta": ("beta",),
    "bandit_lb": ("j", "v"),
}


@dataclasses.dataclass
class EnvSpec:
    kind: str = "point_mass"
    v: Any = None
    d: Any = None
    probs: Optional[List[float]] = None
    values: Optional[List[float]] = None
    value_probs: Optional[List[float]] = None
    bids: Optional[List[float]] = None
    bid_probs: Optional[List[float]] = None
    beta: Optional[float] = None
    j: Optional[int] = None

    def build(self, T: int) -> FiniteEnv:
        if self.kind == "point_mass":
            return point_mass(self.v, self.d)
        if self.kind == "discrete":
            return discrete_joint(list(zip(self.v, self.d)), self.probs)
        if self.kind == "product":
            return product(self.values, self.value_probs, self.bids, self.bid_probs)
        if self.kind == "tight_beta":
            return tight_beta(self.beta)
        return bandit_lb(T, self.j, 1.0 if self.v is None else self.v)


@dataclasses.dataclass
class PolicySpec:
    kind: str = "fixed"
    lipschitz: float = 1.0
    depth_cap: int = DEFAULT_DEPTH_CAP
    restart: str = "sparse"
    bid: Optional[float] = None
    points: Optional[List[List[float]]] = None
    n_levels: Optional[int] = None

    def build(self, rule: PaymentRule, T: int):
        if self.kind == "tree":
            return TreePolicy(rule, T, self.lipschitz, self.depth_cap, restart=self.restart)
        if self.kind == "bucket_bandit":
            return BucketBanditPolicy(rule, T, self.lipschitz)
        if self.kind == "poly":
            return PolyPolicy(rule, T, self.lipschitz, self.restart, self.n_levels)
        return FixedPolicy(self.bid, self.points)


@dataclasses.dataclass
class ExperimentConfig:
    env: EnvSpec = dataclasses.field(default_factory=EnvSpec)
    policy: PolicySpec = dataclasses.field(default_factory=PolicySpec)
    objective: str = VALUE
    nu: float = 1.0
    rule: str = "first"
    q: float = 1.0
    rho: float = 1.0
    exact_roi: bool = False
    dual_step: Optional[float] = None
    dual_cap: Optional[float] = None
    dual_gradient: str = "realized"
    T: int = 100
    seeds: List[int] = dataclasses.field(default_factory=lambda: [0])
    horizons: Optional[List[int]] = None
    out: str = "results"

    def payment_rule(self) -> PaymentRule:
        if self.rule == "first":
            return PaymentRule.first()
        if self.rule == "second":
            return PaymentRule.second()
        return PaymentRule.mixed(self.q)

    def objective_spec(self) -> Objective:
        return Objective(self.objective, self.nu)

    def constraints(self) -> ConstraintSpec:
        return ConstraintSpec(self.rho)

    def dual_state(self, T: int) -> DualState:
        cap = math.inf if self.dual_cap is None else self.dual_cap
        return DualState.for_horizon(self.rho, T, self.dual_step, cap)

    def knobs(self) -> dict:
        """Design knobs recorded in every run's metadata."""
        return {
            "policy": self.policy.kind, "lipschitz": self.policy.lipschitz,
            "depth_cap": self.policy.depth_cap, "restart_grid": self.policy.restart,
            "dual_step": self.dual_step, "dual_cap": self.dual_cap,
            "dual_gradient": self.dual_gradient, "exact_roi": self.exact_roi,
            "rule": self.rule, "q": self.payment_rule().q, "objective": self.objective,
            "nu": self.nu, "rho": self.rho,
        }


# ------------------------------------------------------------ validate ---


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _unit(x) -> bool:
    return _is_num(x) and 0.0 <= x <= 1.0


def _unit_list(x) -> bool:
    return isinstance(x, list) and len(x) > 0 and all(_unit(a) for a in x)


def _prob_list(x, n) -> bool:
    return (isinstance(x, list) and len(x) == n and all(_is_num(a) and a >= 0 for a in x)
            and abs(sum(x) - 1.0) <= 1e-9)


def _pos_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 1


def _check_env(env: EnvSpec, horizons: List[int], problems: List[str]) -> None:
    k = env.kind
    if k not in ENV_KINDS:
        problems.append(f"env.kind must be one of {', '.join(ENV_KINDS)}, got {k!r}")
        return
    if k == "point_mass":
        for name in ("v", "d"):
            if not _unit(getattr(env, name)):
                problems.append(f"env.{name} must be a number in [0, 1]")
    elif k == "discrete":
        if not (_unit_list(env.v) and _unit_list(env.d) and len(env.v) == len(env.d)):
            problems.append("env.v and env.d must be equal-length lists in [0, 1]")
        elif not _prob_list(env.probs, len(env.v)):
            problems.append("env.probs must be nonnegative, one per atom, summing to 1")
    elif k == "product":
        for atoms, probs in (("values", "value_probs"), ("bids", "bid_probs")):
            a, p = getattr(env, atoms), getattr(env, probs)
            if not _unit_list(a):
                problems.append(f"env.{atoms} must be a nonempty list in [0, 1]")
            elif not _prob_list(p, len(a)):
                problems.append(f"env.{probs} must be nonnegative, one per atom, summing to 1")
    elif k == "tight_beta":
        if not (_is_num(env.beta) and 0.0 < env.beta < 0.5):
            problems.append("env.beta must lie in (0, 1/2)")
    elif k == "bandit_lb":
        if env.v is not None and not _unit(env.v):
            problems.append("env.v must be a number in [0, 1]")
        if env.j is not None:
            if not isinstance(env.j, int) or isinstance(env.j, bool) or env.j < 0:
                problems.append("env.j must be a nonnegative integer")
            else:
                for T in horizons:
                    if _pos_int(T) and env.j >= bandit_lb_grid(T)[0]:
                        problems.append(f"env.j = {env.j} out of range for T = {T}")
    extra = [f for f in ("v", "d", "probs", "values", "value_probs", "bids", "bid_probs",
                         "beta", "j") if getattr(env, f) is not None and f not in _ENV_FIELDS[k]]
    if extra:
        problems.append(f"env.kind {k} does not take {', '.join(extra)}")


def _check_policy(pol: PolicySpec, problems: List[str]) -> None:
    if pol.kind not in POLICY_KINDS:
        problems.append(f"policy.kind must be one of {', '.join(POLICY_KINDS)}, got {pol.kind!r}")
    if not (_is_num(pol.lipschitz) and pol.lipschitz > 0):
        problems.append("policy.lipschitz must be positive")
    if not (isinstance(pol.depth_cap, int) and not isinstance(pol.depth_cap, bool)
            and pol.depth_cap >= 0):
        problems.append("policy.depth_cap must be a nonnegative integer")
    if pol.restart not in RESTART_MODES:
        problems.append(f"policy.restart must be one of {', '.join(RESTART_MODES)}")
    if pol.n_levels is not None and not _pos_int(pol.n_levels):
        problems.append("policy.n_levels must be a positive integer")
    if pol.kind == "fixed":
        if (pol.bid is None) == (pol.points is None):
            problems.append("fixed policy needs exactly one of policy.bid or policy.points")
        elif pol.bid is not None and not _unit(pol.bid):
            problems.append("policy.bid must lie in [0, 1]")
        elif pol.points is not None:
            ok = (isinstance(pol.points, list) and len(pol.points) > 0
                  and all(isinstance(p, list) and len(p) == 2 and all(_unit(a) for a in p)
                          for p in pol.points))
            if not ok or any(b[0] <= a[0] for a, b in zip(pol.points, pol.points[1:])):
                problems.append("policy.points must be [value, bid] pairs in [0, 1] "
                                "with increasing values")


def validate(cfg: ExperimentConfig) -> None:
    """Raise one :class:`ConfigError` listing every problem found."""
    problems: List[str] = []
    if not _pos_int(cfg.T):
        problems.append("T must be a positive integer")
    if not (isinstance(cfg.seeds, list) and cfg.seeds
            and all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                    for s in cfg.seeds)):
        problems.append("seeds must be a nonempty list of nonnegative integers")
    if cfg.horizons is not None and not (isinstance(cfg.horizons, list)
                                         and all(_pos_int(T) for T in cfg.horizons)):
        problems.append("horizons must be a list of positive integers")
    horizons = [cfg.T] + list(cfg.horizons or [])
    _check_env(cfg.env, horizons, problems)
    _check_policy(cfg.policy, problems)
    if cfg.objective not in (VALUE, QUASI_LINEAR):
        problems.append(f"objective.kind must be {VALUE} or {QUASI_LINEAR}")
    if not (_is_num(cfg.nu) and cfg.nu >= 0):
        problems.append("objective.nu must be nonnegative")
    if cfg.rule not in RULES:
        problems.append(f"payment.rule must be one of {', '.join(RULES)}")
    elif cfg.rule == "mixed" and not _unit(cfg.q):
        problems.append("payment.q must lie in [0, 1]")
    if not (_is_num(cfg.rho) and 0 < cfg.rho <= 1):
        problems.append("constraints.rho must lie in (0, 1]")
    if not isinstance(cfg.exact_roi, bool):
        problems.append("constraints.exact_roi must be true or false")
    if cfg.dual_step is not None and not (_is_num(cfg.dual_step) and cfg.dual_step > 0):
        problems.append("dual.step must be positive or null")
    if cfg.dual_cap is not None and not (_is_num(cfg.dual_cap) and cfg.dual_cap > 0):
        problems.append("dual.cap must be positive or null")
    if cfg.dual_gradient not in GRADIENTS:
        problems.append(f"dual.gradient must be one of {', '.join(GRADIENTS)}")
    bandit = cfg.policy.kind == "bucket_bandit"
    if bandit and cfg.dual_gradient == "expected":
        problems.append("dual.gradient expected needs a full-information policy")
    if cfg.exact_roi and cfg.dual_gradient == "expected":
        problems.append("exact_roi runs use realized dual gradients")
    if not isinstance(cfg.out, str) or not cfg.out:
        problems.append("out must be a nonempty path")
    if problems:
        raise ConfigError(problems)


# ---------------------------------------------------- parse and render ---

_SECTIONS = {
    "env": None, "policy": None,
    "objective": {"kind": "objective", "nu": "nu"},
    "payment": {"rule": "rule", "q": "q"},
    "constraints": {"rho": "rho", "exact_roi": "exact_roi"},
    "dual": {"step": "dual_step", "cap": "dual_cap", "gradient": "dual_gradient"},
}
_TOP = ("T", "seeds", "horizons", "out")


def _num(x):
    # YAML reads "1" as int; keep ints for integer fields only.
    return float(x) if isinstance(x, int) and not isinstance(x, bool) else x


def _nums(x):
    if isinstance(x, list):
        return [_nums(a) for a in x]
    return _num(x)


def from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from parsed YAML."""
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping of sections"])
    problems: List[str] = []
    known = set(_SECTIONS) | set(_TOP)
    for key in data:
        if key not in known:
            problems.append(f"unknown section {key!r}")
    kw: Dict[str, Any] = {}
    for section, mapping in _SECTIONS.items():
        block = data.get(section)
        if block is None:
            continue
        if not isinstance(block, dict):
            problems.append(f"section {section} must be a mapping")
            continue
        if mapping is None:
            cls = EnvSpec if section == "env" else PolicySpec
            names = {f.name for f in dataclasses.fields(cls)}
            bad = [k for k in block if k not in names]
            if bad:
                problems.append(f"unknown keys in {section}: {', '.join(map(str, bad))}")
                continue
            ints = {"j", "depth_cap", "n_levels"}
            vals = {k: (v if k in ints or k == "kind" or k == "restart" else _nums(v))
                    for k, v in block.items()}
            kw[section] = cls(**vals)
        else:
            for k, v in block.items():
                if k not in mapping:
                    problems.append(f"unknown key {section}.{k}")
                    continue
                kw[mapping[k]] = _num(v) if mapping[k] in ("nu", "q", "rho", "dual_step",
                                                           "dual_cap") else v
    for key in _TOP:
        if key in data:
            kw[key] = data[key]
    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def parse(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML: {exc}"]) from None
    return from_dict(data if data is not None else {})


DEFAULT_TEXT = """\
env: {kind: tight_beta, beta: 0.1}
policy: {kind: tree, lipschitz: 1.0, restart: sparse}
payment: {rule: second}
constraints: {rho: 1.0, exact_roi: true}
T: 500
seeds: [0]
out: results
"""


def default() -> ExperimentConfig:
    """Config used when none is given: exact-ROI tree policy on TightBeta(0.1)."""
    return parse(DEFAULT_TEXT)


def load(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse(fh.read())


def to_dict(cfg: ExperimentConfig) -> dict:
    env = {k: v for k, v in dataclasses.asdict(cfg.env).items()
           if k == "kind" or v is not None}
    policy = {k: v for k, v in dataclasses.asdict(cfg.policy).items()
              if v is not None or k in ("kind",)}
    out = {"env": env, "policy": policy}
    for section, mapping in _SECTIONS.items():
        if mapping is not None:
            out[section] = {k: getattr(cfg, attr) for k, attr in mapping.items()}
    for key in _TOP:
        out[key] = getattr(cfg, key)
    return out


def render(cfg: ExperimentConfig) -> str:
    """Canonical YAML text for ``cfg``."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)
