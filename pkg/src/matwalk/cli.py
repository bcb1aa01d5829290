"""Command line front end.

Four subcommands mirror the library's main entry points: `simulate` runs
the scalar estimators at one configuration, `reversal-check` evaluates
the path-reversal identity in both conditioning variants, `spectral`
reports the transfer-operator constants, and `verify` drives a full
report suite from a JSON config.

Exit codes: 0 success, 1 a check failed or a runtime error stopped the
run, 2 the inputs were malformed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .errors import ConfigError, LawFileError, MatwalkError
from .geometry import DualProjectivePoint, ProjectivePoint
from .laws import load_law
from .reversal import reversal_check
from .rng import SamplerState, derive_seed
from .spectral import CircleGrid, lyapunov_and_variance, nu_weights
from .targets import HatFunction, SeparableTarget, parse_step_spec
from .verify import _fmt, load_config, recenter_two_stage, run_suite
from .walks import (
    estimate_exit_local,
    estimate_local_prob,
    estimate_persistence,
    estimate_V,
)

import math

import numpy as np


def _parse_vector(text: str, dim: int) -> np.ndarray:
    """A point spec: one number is an angle (dimension 2 only), otherwise
    comma-separated coordinates of the right length."""
    parts = [p for p in text.split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError as e:
        raise ConfigError(f"bad point spec {text!r}: {e}") from e
    if len(vals) == 1:
        if dim != 2:
            raise ConfigError(
                f"angle form needs dimension 2; law has dimension {dim}")
        a = vals[0]
        return np.array([math.cos(a), math.sin(a)])
    if len(vals) != dim:
        raise ConfigError(
            f"point {text!r} has {len(vals)} coordinates, law has dimension {dim}")
    return np.array(vals)


def _parse_interval(text: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError as e:
        raise ConfigError(f"bad interval {text!r}, want a,b: {e}") from e
    if not a < b:
        raise ConfigError(f"interval needs a < b, got [{a}, {b}]")
    return a, b


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    law = load_law(args.law)
    if args.auto_recenter:
        law, info = recenter_two_stage(law)
        print(f"# recentered: spectral {info['lambda_spectral']}, "
              f"refinement {info['drift_refinement']}", file=sys.stderr)
    x = ProjectivePoint(_parse_vector(args.x, law.dim))
    sign = 1 if args.sign == "plus" else -1

    def _state(tag: str) -> SamplerState:
        return SamplerState(derive_seed(args.seed, "cli-" + tag))

    results = [
        ("V", estimate_V(law, x, args.t, args.n, args.paths, _state("V"),
                         sign=sign, workers=args.workers)),
        ("persistence", estimate_persistence(
            law, x, args.t, args.n, args.paths, _state("persistence"),
            sign=sign, workers=args.workers)),
    ]
    if args.interval is not None:
        a, b = _parse_interval(args.interval)
        results.append(("local_prob", estimate_local_prob(
            law, x, args.t, a, b, args.n, args.paths, _state("local_prob"),
            sign=sign, workers=args.workers)))
        results.append(("exit_prob", estimate_exit_local(
            law, x, args.t, args.n, args.paths, _state("exit_prob"),
            sign=sign, workers=args.workers)))

    lines = ["estimator,value,stderr,n_samples,n,t,seed"]
    for name, est in results:
        lines.append(",".join([
            name, _fmt(est.value), _fmt(est.stderr), str(est.n_samples),
            str(args.n), _fmt(args.t), str(args.seed),
        ]))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# reversal-check


def _cmd_reversal_check(args) -> int:
    law = load_law(args.law)
    x = ProjectivePoint(_parse_vector(args.x, law.dim))
    y = DualProjectivePoint(_parse_vector(args.y, law.dim))
    prof = parse_step_spec(args.h)
    if args.h_bump is not None:
        vals = [float(p) for p in args.h_bump.split(",")]
        if len(vals) not in (2, 3):
            raise ConfigError("--h-bump wants center,halfwidth[,height]")
        h = SeparableTarget(profile=prof, angular=HatFunction.bump(*vals))
    else:
        h = prof
    psi = parse_step_spec(args.psi)

    lines = ["variant,mode,n,lhs,rhs,gap,se_lhs,se_rhs,n_words,n_dropped"]
    for variant in ("tau_gt_n_minus_1", "tau_gt_n"):
        kw = {}
        if args.mode == "mc":
            kw = dict(s=SamplerState(args.seed), n_words=args.words)
        res = reversal_check(law, x, y, h, psi, args.n, mode=args.mode,
                             variant=variant, **kw)
        lines.append(",".join([
            variant, res.mode, str(res.n), _fmt(res.lhs), _fmt(res.rhs),
            _fmt(res.gap), _fmt(res.se_lhs), _fmt(res.se_rhs),
            str(res.n_words), str(res.n_dropped),
        ]))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# spectral


def _cmd_spectral(args) -> int:
    law = load_law(args.law)
    grid = CircleGrid(args.grid)
    lam, ups2, diag = lyapunov_and_variance(law, grid, h=args.h)
    weights = nu_weights(law, grid)
    out = {
        "lambda_mu": lam,
        "upsilon_sq": ups2,
        "nu_weights": [float(w) for w in weights],
        "diagnostics": diag,
    }
    _write_text(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir is not None:
        cfg = replace(cfg, out_dir=args.out_dir)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    report = run_suite(cfg)
    for row in report.rows:
        mark = "PASS" if row.passed else "FAIL"
        nn = "" if row.n is None else f" n={row.n}"
        print(f"[{mark}] {row.check}: {row.name}{nn} "
              f"empirical={_fmt(row.empirical)} reference={_fmt(row.reference)}")
    n_fail = sum(not r.passed for r in report.rows)
    if report.aborted is not None:
        print(f"aborted in {report.aborted}; partial report", file=sys.stderr)
    print(f"{len(report.rows)} rows, {n_fail} failing")
    if cfg.out_dir is not None:
        print(f"report written to {cfg.out_dir}/report.csv and report.json")
    return report.exit_code()


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="matwalk",
        description="conditioned random walks on matrix products",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the scalar estimators once")
    sim.add_argument("--law", required=True, help="law JSON file")
    sim.add_argument("--x", default="0.0",
                     help="start point: angle, or comma-separated coordinates")
    sim.add_argument("--t", type=float, default=1.0, help="initial budget t")
    sim.add_argument("--n", type=int, required=True, help="number of steps")
    sim.add_argument("--paths", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sign", choices=("plus", "minus"), default="plus",
                     help="sign of the cocycle in t + sign*S_n")
    sim.add_argument("--interval", default=None, metavar="A,B",
                     help="also estimate window and exit probabilities")
    sim.add_argument("--auto-recenter", action="store_true",
                     help="shift the law to zero drift before estimating")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", default="-", help="output CSV path, - for stdout")
    sim.set_defaults(func=_cmd_simulate)

    rev = sub.add_parser("reversal-check",
                         help="evaluate the reversal identity, both variants")
    rev.add_argument("--law", required=True)
    rev.add_argument("--n", type=int, required=True)
    rev.add_argument("--mode", choices=("enumerate", "mc"), default="enumerate")
    rev.add_argument("--h", default="0:1:1", help="target step spec a:b:v,...")
    rev.add_argument("--h-bump", default=None, metavar="C,W[,H]",
                     help="optional angular hat factor on the target")
    rev.add_argument("--psi", default="-2:2:1", help="test function step spec")
    rev.add_argument("--x", default="0.3")
    rev.add_argument("--y", default="1.1",
                     help="dual start point, same format as --x")
    rev.add_argument("--seed", type=int, default=0, help="mc mode word seed")
    rev.add_argument("--words", type=int, default=20_000,
                     help="mc mode sample size")
    rev.add_argument("--out", default="-")
    rev.set_defaults(func=_cmd_reversal_check)

    spec = sub.add_parser("spectral",
                          help="transfer-operator drift, variance, weights")
    spec.add_argument("--law", required=True)
    spec.add_argument("--grid", type=int, default=512, help="circle grid size")
    spec.add_argument("--h", type=float, default=1e-3,
                      help="finite-difference step for the derivatives")
    spec.add_argument("--out", default="-", help="output JSON path")
    spec.set_defaults(func=_cmd_spectral)

    ver = sub.add_parser("verify", help="run a report suite from a config")
    ver.add_argument("--config", required=True, help="experiment JSON file")
    ver.add_argument("--out-dir", default=None,
                     help="override the config's report directory")
    ver.add_argument("--workers", type=int, default=None,
                     help="override the config's worker count")
    ver.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LawFileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MatwalkError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
