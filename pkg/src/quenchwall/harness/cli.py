"""Command line interface.

Exit codes: 0 pass, 1 gated failure, 2 invalid input.  The default output
directory is taken from ``QUENCHWALL_OUT``.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path
import sys

import numpy as np

from ..analysis import aggregate_quenched, fit_exponent, fits_to_jsonl
from ..engine.curves import SurvivalCurve
from ..errors import InvalidInput, QuenchwallError
from ..laws import DensityLaw, FiniteLaw, GaussianLaw
from ..rng import ROLE_BOOTSTRAP, task_stream
from ..spectral import results_to_csv, solve
from ..tilt import gaussian_tail, gaussian_tail_bounds, theta_max, tilted_mean_bracket_check
from .config import OUT_ENV, ExperimentConfig, default_out_dir
from .runner import replay, run_experiment
from .validate import LEVELS, validate

EXIT_PASS, EXIT_GATED, EXIT_INVALID = 0, 1, 2
TILT_SCHEMA = "quenchwall.tilt/1"
TILT_FAMILIES = {
    "gaussian": lambda: GaussianLaw(0.0, 1.0),
    "rademacher": FiniteLaw.rademacher,
    "two-point": lambda: FiniteLaw((-1.0, 2.0), (2 / 3, 1 / 3)),
    "laplace": lambda: DensityLaw.laplace(1.0),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pair(text: str) -> list:
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return [a, b]


def _floats(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quenchwall", description="Quenched persistence exponents above random walls.",
                epilog=f"Outputs go to --out, else ${OUT_ENV}, else ./quenchwall-out.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment configuration (YAML)")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--walls", type=_positive_int, help="number of quenched walls")
    common.add_argument("--particles", type=_positive_int)
    common.add_argument("--dx", type=float)
    common.add_argument("--horizon-max", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--window", type=_pair, help="end window a,b")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--jobs", type=_positive_int, default=1)

    s = sub.add_parser("simulate", parents=[common], help="run one experiment")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("exponent", help="fit and aggregate existing curves")
    e.add_argument("curves", type=Path, help="curves CSV")
    e.add_argument("--scale", choices=("log-time", "time"), default="log-time")
    e.add_argument("--fit-window", type=_pair)
    e.add_argument("--correction", type=float, help="power of the finite-size correction term")
    e.add_argument("--seed", type=_u64, default=0, help="bootstrap seed")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_exponent)

    sp = sub.add_parser("spectral", help="annealed exponent sweeps")
    sp.add_argument("--mu1", type=float, default=1.0)
    sp.add_argument("--mu2", type=float, default=1.0)
    sp.add_argument("--beta", type=_floats, default=[1.0], help="one value or a comma list")
    sp.add_argument("--L", type=float, default=8.0)
    sp.add_argument("--h", type=float, default=0.05)
    sp.add_argument("--scheme", choices=("upwind", "central"), default="upwind")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_spectral)

    t = sub.add_parser("tilt", help="tilted-mean and Gaussian tail checks")
    t.add_argument("--family", choices=sorted(TILT_FAMILIES), default="rademacher")
    t.add_argument("--points", type=_positive_int, default=31)
    t.add_argument("--out", type=Path)
    t.set_defaults(func=cmd_tilt)

    v = sub.add_parser("validate", help="property and acceptance suite")
    v.add_argument("--level", choices=LEVELS, default="quick")
    v.add_argument("--jobs", type=_positive_int, default=1)
    v.add_argument("--out", type=Path)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("replay", help="re-run a stored record")
    r.add_argument("record", type=Path, help="record directory")
    r.add_argument("--jobs", type=_positive_int, default=1)
    r.set_defaults(func=cmd_replay)
    return p


def _emit(args, name: str, text: str) -> None:
    if getattr(args, "out", None) is None:
        sys.stdout.write(text)
        return
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / name
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_overrides(seed=args.seed, n_walls=args.walls, particles=args.particles, dx=args.dx,
                             horizon_max=args.horizon_max, beta=args.beta, window=args.window)
    rec = run_experiment(cfg, jobs=args.jobs)
    path = rec.save(args.out or cfg.out_dir or default_out_dir())
    summary = {"schema": "quenchwall.summary/1", "record": str(path), "passed": rec.passed,
               "verdicts": [v.to_dict() for v in rec.verdicts]}
    if rec.aggregate is not None:
        summary.update(mean=rec.aggregate.mean, ci95=list(rec.aggregate.ci95),
                       n_walls=rec.aggregate.n_walls, excluded=rec.aggregate.excluded)
    print(json.dumps(summary))
    return EXIT_PASS if rec.passed else EXIT_GATED


def cmd_exponent(args) -> int:
    try:
        text = args.curves.read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {args.curves}: {exc}") from None
    curves = SurvivalCurve.from_csv(text)
    if not curves:
        raise InvalidInput("no curves in input")
    fits = [fit_exponent(c, args.scale, args.fit_window, args.correction) for c in curves]
    out = fits_to_jsonl(fits)
    feasible = [f for f in fits if not f.infeasible]
    if feasible:
        agg = aggregate_quenched(fits, rng=task_stream(args.seed, 0, 0, ROLE_BOOTSTRAP)).to_dict()
        agg.pop("fits")
        out += json.dumps(agg) + "\n"
    _emit(args, "fits.jsonl", out)
    return EXIT_PASS if feasible else EXIT_GATED


def cmd_spectral(args) -> int:
    results = [solve(args.mu1, args.mu2, b, args.L, args.h, args.scheme) for b in args.beta]
    _emit(args, "spectral.csv", results_to_csv(results))
    return EXIT_PASS


def cmd_tilt(args) -> int:
    law = TILT_FAMILIES[args.family]()
    thetas = np.linspace(0.0, theta_max(law), args.points)
    rep = tilted_mean_bracket_check(law, thetas)
    xs = np.round(np.arange(1, 101) * 0.1, 10)
    tail_ok = all(lo <= gaussian_tail(x) <= hi for x in xs for lo, hi in [gaussian_tail_bounds(float(x))])
    doc = {"schema": TILT_SCHEMA, "family": args.family, "theta_max": float(thetas[-1]),
           "K": rep.K, "max_deviation": float(rep.deviations.max()), "c_low": rep.c_low,
           "c_high": rep.c_high, "bracket_holds": rep.holds, "gaussian_tail_holds": bool(tail_ok)}
    _emit(args, "tilt.json", json.dumps(doc) + "\n")
    return EXIT_PASS if rep.holds and tail_ok else EXIT_GATED


def cmd_validate(args) -> int:
    report = validate(args.level, jobs=args.jobs, progress=lambda r: print(r.line(), flush=True))
    print(report.table().splitlines()[-1])
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"validation-{args.level}.jsonl").write_text(report.to_jsonl())
    return EXIT_PASS if report.passed else EXIT_GATED


def cmd_replay(args) -> int:
    rec, identical = replay(args.record, jobs=args.jobs)
    print(json.dumps({"schema": "quenchwall.replay/1", "record": str(args.record),
                      "identical": identical, "passed": rec.passed}))
    return EXIT_PASS if identical else EXIT_GATED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"quenchwall: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidInput as exc:
        print(f"quenchwall: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except QuenchwallError as exc:
        print(f"quenchwall: failed: {exc}", file=sys.stderr)
        return EXIT_GATED


if __name__ == "__main__":
    sys.exit(main())
