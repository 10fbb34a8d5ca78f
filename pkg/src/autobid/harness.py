"""Experiment plumbing shared by the CLI, the demos and the acceptance tests.

Work is split into (horizon, seed) tasks that own all their state; a pool
of worker processes runs them and the caller collects the results in task
order, so outputs do not depend on the number of workers.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig
from .errors import CapacityError
from .oracle import OptSolution, lipschitz_candidates, metrics, solve_opt
from .orchestrator import RunTrace, run_exact_roi, run_primal_dual


def optimum(cfg: ExperimentConfig, T: int) -> OptSolution:
    """Best mixture of Lipschitz bidding maps over the config's environment."""
    env = cfg.env.build(T)
    cands = lipschitz_candidates(env, cfg.policy.lipschitz)
    return solve_opt(env, cands, cfg.payment_rule(), cfg.objective_spec(), cfg.rho)


def run_one(cfg: ExperimentConfig, T: int, seed: int,
            on_round: Optional[Callable] = None) -> RunTrace:
    """One seeded run of the configured pipeline at horizon ``T``."""
    env = cfg.env.build(T)
    rule, obj, cons = cfg.payment_rule(), cfg.objective_spec(), cfg.constraints()
    policy = cfg.policy.build(rule, T)
    if cfg.exact_roi:
        slack = cfg.policy.build(rule, T)
        trace = run_exact_roi(env, policy, slack, obj, rule, cons, T, seed,
                              dual=cfg.dual_state(T), on_round=on_round)
    else:
        trace = run_primal_dual(env, policy, obj, rule, cons, T, seed, dual=cfg.dual_state(T),
                                dual_gradient=cfg.dual_gradient, on_round=on_round)
    trace.metadata.update(cfg.knobs())
    trace.metadata.update(policy.metadata())
    trace.metadata["env"] = env.name
    return trace


@dataclasses.dataclass
class RunResult:
    T: int
    seed: int
    csv: str
    summary: dict


def _summarize(trace: RunTrace, opt: Optional[float]) -> dict:
    out = {"T": trace.T, "seed": trace.metadata.get("seed"),
           "cum_objective": float(trace.cum_objective[-1]) if trace.T else 0.0,
           "min_roi_slack": float(trace.roi_slack.min()) if trace.T else 0.0,
           "budget_used": float(trace.payment.sum()), "budget": trace.budget,
           "budget_ok": bool(trace.payment.sum() <= trace.budget + 1e-9)}
    if opt is not None:
        rep = metrics(trace.gain, trace.roi_slack, trace.payment, opt, trace.budget)
        out.update(rep.as_dict())
    out["metadata"] = trace.metadata
    return out


def _run_task(args: Tuple[ExperimentConfig, int, int, Optional[float], bool]) -> RunResult:
    cfg, T, seed, opt, want_csv = args
    trace = run_one(cfg, T, seed)
    return RunResult(T, seed, trace.to_csv() if want_csv else "", _summarize(trace, opt))


def opt_or_none(cfg: ExperimentConfig, T: int) -> Tuple[Optional[float], str]:
    try:
        return optimum(cfg, T).value, ""
    except CapacityError as exc:
        return None, f"oracle skipped: {exc}"


def map_tasks(fn, tasks: Sequence, threads: int = 1) -> List:
    """``[fn(t) for t in tasks]``, spread over ``threads`` processes."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def run_seeds(cfg: ExperimentConfig, seeds: Sequence[int], threads: int = 1,
              want_csv: bool = True) -> Tuple[List[RunResult], dict]:
    """All seeds at the config horizon, with a summary block."""
    t0 = time.perf_counter()
    opt, note = opt_or_none(cfg, cfg.T)
    results = map_tasks(_run_task, [(cfg, cfg.T, s, opt, want_csv) for s in seeds], threads)
    summary = {
        "command": "run", "T": cfg.T, "seeds": list(seeds), "opt_per_round": opt,
        "knobs": cfg.knobs(), "runs": [r.summary for r in results],
        "runtime_seconds": time.perf_counter() - t0,
    }
    if note:
        summary["note"] = note
    return results, summary


def fit_slope(horizons: Sequence[float], means: Sequence[float]) -> Tuple[Optional[float], List[str]]:
    """Least-squares slope of ``log(mean)`` against ``log(T)``.

    Horizons with a nonpositive mean are dropped with a note; fewer than
    two usable horizons give ``None``.
    """
    notes, xs, ys = [], [], []
    for T, m in zip(horizons, means):
        if not (m > 0 and math.isfinite(m)):
            notes.append(f"T={T} excluded: mean regret {m:.6g} is not positive")
            continue
        xs.append(math.log(T))
        ys.append(math.log(m))
    if len(xs) < 2:
        notes.append("fewer than two usable horizons; no slope")
        return None, notes
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, notes


def _regret_task(args) -> float:
    cfg, T, seed, opt = args
    trace = run_one(cfg, T, seed)
    return float(T * opt - trace.gain.sum())


def sweep(cfg: ExperimentConfig, horizons: Sequence[int], seeds: Sequence[int],
          threads: int = 1, regret_fn: Callable = _regret_task) -> dict:
    """Mean and spread of regret per horizon and the fitted log-log slope.

    ``regret_fn((cfg, T, seed, opt))`` returns one run's regret; tests
    inject stubs here.
    """
    if len(horizons) < 2 or len(seeds) < 2:
        raise ValueError("a sweep needs at least two horizons and two seeds")
    t0 = time.perf_counter()
    opts: Dict[int, float] = {}
    for T in horizons:
        opt, note = opt_or_none(cfg, T)
        if opt is None:
            raise CapacityError(note)
        opts[T] = opt
    tasks = [(cfg, T, s, opts[T]) for T in horizons for s in seeds]
    regrets = np.array(map_tasks(regret_fn, tasks, threads), dtype=float)
    regrets = regrets.reshape(len(horizons), len(seeds))
    rows = [{"T": int(T), "opt_per_round": opts[T], "mean_regret": float(r.mean()),
             "std_regret": float(r.std(ddof=1)), "n": int(r.size)}
            for T, r in zip(horizons, regrets)]
    slope, notes = fit_slope(list(horizons), [row["mean_regret"] for row in rows])
    return {"command": "sweep", "rows": rows, "slope": slope, "notes": notes,
            "seeds": list(seeds), "knobs": cfg.knobs(), "regrets": regrets.tolist(),
            "runtime_seconds": time.perf_counter() - t0}


def sweep_csv(result: dict) -> str:
    lines = ["T,opt_per_round,mean_regret,std_regret,n"]
    for row in result["rows"]:
        lines.append(f"{row['T']},{row['opt_per_round']:.12g},{row['mean_regret']:.12g},"
                     f"{row['std_regret']:.12g},{row['n']}")
    return "\n".join(lines) + "\n"
