"""Command line entry point: ``run``, ``sweep``, ``oracle`` and ``probe``.

Exit codes: 0 success, 2 invalid configuration, 3 invariant failure,
4 input/output error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

from . import harness, probes
from .config import ExperimentConfig, default, load, render
from .errors import CapacityError, ConfigError, InvariantError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4


def _clean(x):
    """JSON-safe copy: infinities and NaN become null, numpy scalars plain."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _out_dir(args, cfg: ExperimentConfig) -> str:
    out = args.out or cfg.out
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    return out


def _config(args) -> ExperimentConfig:
    if args.config is None:
        return default()
    try:
        return load(args.config)
    except FileNotFoundError as exc:
        raise OSError(f"cannot read config {args.config}: {exc.strerror}") from exc


def _seeds(args, cfg: ExperimentConfig) -> List[int]:
    return [args.seed] if args.seed is not None else list(cfg.seeds)


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    results, summary = harness.run_seeds(cfg, _seeds(args, cfg), args.threads)
    for res in results:
        _write(os.path.join(out, f"trace_T{res.T}_seed{res.seed}.csv"), res.csv)
    summary["config"] = render(cfg)
    _write(os.path.join(out, "summary.json"), dumps(summary))
    for run in summary["runs"]:
        regret = run.get("regret")
        print(f"seed {run['seed']}: objective {run['cum_objective']:.6g}"
              + ("" if regret is None else f", regret {regret:.6g}")
              + f", min ROI slack {run['min_roi_slack']:.6g}"
              + f", budget used {run['budget_used']:.6g}/{run['budget']:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    horizons = cfg.horizons or []
    seeds = _seeds(args, cfg)
    if len(horizons) < 2 or len(seeds) < 2:
        raise ConfigError(["sweep needs at least two horizons and two seeds"])
    out = _out_dir(args, cfg)
    result = harness.sweep(cfg, horizons, seeds, args.threads)
    result["config"] = render(cfg)
    _write(os.path.join(out, "sweep.csv"), harness.sweep_csv(result))
    _write(os.path.join(out, "sweep.json"), dumps(result))
    for row in result["rows"]:
        print(f"T={row['T']}: mean regret {row['mean_regret']:.6g} "
              f"(std {row['std_regret']:.3g}, n={row['n']})")
    for note in result["notes"]:
        print(f"note: {note}")
    slope = result["slope"]
    print("slope: " + ("undefined" if slope is None else f"{slope:.4f}"))
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    sol = harness.optimum(cfg, cfg.T)
    report = {"command": "oracle", "env": cfg.env.build(cfg.T).name, "T": cfg.T,
              "knobs": cfg.knobs(), **sol.as_dict()}
    text = dumps(report)
    if args.out:
        out = _out_dir(args, cfg)
        _write(os.path.join(out, "oracle.json"), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_probe(args) -> int:
    names = args.suite or list(probes.SUITES)
    unknown = [n for n in names if n not in probes.SUITES]
    if unknown:
        raise ConfigError([f"unknown probe suite {n!r}" for n in unknown])
    results = probes.run_all(names)
    for res in results:
        print(res.line())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "probe.json"), dumps(
            [{"name": r.name, "checked": r.checked, "violations": r.violations,
              "detail": r.detail, "passed": r.passed} for r in results]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autobid", description="Online bidding under budget and ROI constraints.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run seeded experiments and write CSV traces"),
                            ("sweep", cmd_sweep, "regret scaling over horizons and seeds"),
                            ("oracle", cmd_oracle, "benchmark value of the environment"),
                            ("probe", cmd_probe, "run the invariant suites")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        if name == "probe":
            p.add_argument("--suite", action="append",
                           help=f"suite to run (repeatable): {', '.join(probes.SUITES)}")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
