"""Command-line interface.

Inputs are file paths (one number per line, or a single-column CSV whose
header line is skipped when it is not numeric), ``-`` for standard input, or
the name of an embedded data set.  A data set name may carry a Python slice
of its sorted values, e.g. ``cloud-natural[:-1]`` drops the largest value.

Exit codes: 0 success, 2 usage or data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from typing import Optional, Sequence

import numpy as np

from . import datasets
from .exceptions import ConvergenceError, NumericalError
from .influence import influence_table
from .manifest import run_manifest
from .mdpd import fit_mdpd
from .model import LognormalParams, RngSeed, Sample
from .montecarlo import (METHOD_TAGS, MethodSpec, SWEEP_METHODS, default_workers, get_preset,
                         outlier_sweep, preset_scenarios, run_method, run_scenario)
from .wald import DEFAULT_ALPHA

DEFAULT_BETA = 0.1
DEFAULT_RESAMPLES = 500
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

_SLICE = re.compile(r"^(?P<name>[\w-]+)\[(?P<start>-?\d*):(?P<stop>-?\d*)\]$")


class UsageError(Exception):
    """Bad arguments or unreadable data (exit code 2)."""


# --------------------------------------------------------------------------
# input


def _parse_numbers(text: str, source: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    values = []
    for i, r in enumerate(rows):
        cells = [c.strip() for c in r if c.strip()]
        if len(cells) != 1:
            raise UsageError(f"{source}: line {i + 1} must hold exactly one value")
        try:
            values.append(float(cells[0]))
        except ValueError:
            if i == 0:
                continue  # header
            raise UsageError(f"{source}: line {i + 1} is not a number: {cells[0]!r}") from None
    if not values:
        raise UsageError(f"{source}: no observations")
    return np.array(values)


def read_input(spec: str, stdin=None) -> Sample:
    """Resolve a data argument to a :class:`Sample`."""
    m = _SLICE.match(spec)
    name = m.group("name") if m else spec
    if name in datasets.NAMES:
        values = datasets.load(name).values
        if m:
            start = int(m.group("start")) if m.group("start") else None
            stop = int(m.group("stop")) if m.group("stop") else None
            values = values[start:stop]
        label = spec
    elif spec == "-":
        values = _parse_numbers((stdin or sys.stdin).read(), "stdin")
        label = "stdin"
    else:
        try:
            with open(spec) as fh:
                text = fh.read()
        except OSError as e:
            raise UsageError(f"cannot read {spec!r}: {e.strerror}") from None
        values = _parse_numbers(text, spec)
        label = spec
    try:
        return Sample(values, label)
    except ValueError as e:
        raise UsageError(f"{spec}: {e}") from None


# --------------------------------------------------------------------------
# output


def _emit(obj, fmt: str, out):
    if fmt == "json":
        json.dump(obj, out, indent=2, sort_keys=False, default=_json_default)
        out.write("\n")
    else:
        for k, v in obj.items():
            if isinstance(v, dict):
                continue
            out.write(f"{k}: {v}\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# commands


def cmd_fit(args, out):
    s = read_input(args.input, args.stdin)
    fit = fit_mdpd(s, args.beta)
    d = fit.to_dict()
    d["n"] = len(s)
    d["mean"] = math.exp(fit.mu + 0.5 * fit.sigma ** 2)
    if fit.beta == 0.0:
        d["sigma2_unbiased"] = fit.params.sigma2 * len(s) / (len(s) - 1)
    _emit(d, args.format, out)


def cmd_test(args, out):
    if args.method == "dpd":
        beta = DEFAULT_BETA if args.beta is None else args.beta
        method = MethodSpec("dpd", beta)
    else:
        if args.beta is not None:
            raise UsageError(f"--beta does not apply to method {args.method!r}")
        method = MethodSpec(args.method)
    s1 = read_input(args.input1, args.stdin)
    s2 = read_input(args.input2, args.stdin)
    res = run_method(method, s1, s2, args.resamples, RngSeed(args.seed))
    _emit(res.to_dict(args.alpha), args.format, out)


def _grid(args):
    if args.points < 1 or not (0 < args.xmin <= args.xmax):
        raise UsageError("x grid needs 0 < xmin <= xmax and at least one point")
    if args.points == 1:
        if args.xmin != args.xmax:
            raise UsageError("a one-point grid needs xmin == xmax")
        return [args.xmin]
    return list(np.logspace(math.log10(args.xmin), math.log10(args.xmax), args.points))


def cmd_influence(args, out):
    if not args.sigma > 0:
        raise UsageError("sigma must be positive")
    for b in args.beta:
        if not 0 <= b <= 1:
            raise UsageError("beta must lie in [0, 1]")
    rows = influence_table(args.beta, LognormalParams(args.mu, args.sigma), _grid(args))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["beta", "x", "if_mu", "if_sigma"])
    for b, x, a, c in rows:
        w.writerow([f"{b:g}", repr(x), repr(a), repr(c)])


def cmd_simulate(args, out):
    try:
        cfg = get_preset(args.preset)
    except KeyError as e:
        raise UsageError(e.args[0]) from None
    try:
        cfg = cfg.with_overrides(replications=args.reps, master_seed=args.seed,
                                 size_grid=tuple(args.sizes) if args.sizes else None,
                                 alpha=args.alpha)
    except ValueError as e:
        raise UsageError(str(e)) from None
    workers = default_workers() if args.workers == 0 else args.workers
    report = run_scenario(cfg, workers=workers)
    if args.format == "json":
        rows = [{"method": r.method.tag, "beta": r.method.beta, "n": r.n, "n1": r.n1,
                 "n2": r.n2, "rejection_rate": r.rejection_rate, "mc_se": r.mc_se,
                 "failures": r.failures} for r in report.rows]
        _emit({"scenario": cfg.name, "replications": cfg.replications,
               "master_seed": cfg.master_seed, "elapsed": report.elapsed, "rows": rows},
              "json", out)
    else:
        out.write(report.to_csv())


def cmd_sweep(args, out):
    s1 = read_input(args.input1, args.stdin)
    s2 = read_input(args.input2, args.stdin)
    try:
        rows = outlier_sweep(s1, s2, args.index, args.values, SWEEP_METHODS)
    except (IndexError, ValueError) as e:
        raise UsageError(str(e)) from None
    if args.format == "json":
        _emit({"rows": [{"value": r.value, "p_values": r.p_values} for r in rows]}, "json", out)
        return
    labels = [m.label for m in SWEEP_METHODS]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["value"] + labels)
    for r in rows:
        w.writerow([f"{r.value:g}"] + [f"{r.p_values[k]:.6g}" for k in labels])


def cmd_dataset(args, out):
    if args.name is None:
        out.write("\n".join(datasets.NAMES) + "\n")
        return
    m = _SLICE.match(args.name)
    if (m.group("name") if m else args.name) not in datasets.NAMES:
        raise UsageError(f"unknown dataset {args.name!r}; choose from {', '.join(datasets.NAMES)}")
    out.write("".join(f"{v:.15g}\n" for v in read_input(args.name).values))


def cmd_presets(args, out):
    for c in preset_scenarios():
        out.write(c.name + "\n")


def cmd_reproduce(args, out):
    summary = run_manifest(ids=args.id or None, include_tests=args.include_tests, out=out)
    if summary["failed"]:
        raise _ReproduceFailed()


class _ReproduceFailed(Exception):
    pass


# --------------------------------------------------------------------------
# parser


def _beta(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("beta must lie in [0, 1]")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _alpha(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lnwald",
                                description="Robust Wald-type tests for two log-normal means.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="MDPD fit of one sample (JSON)")
    f.add_argument("input")
    f.add_argument("--beta", type=_beta, default=DEFAULT_BETA)
    f.add_argument("--format", choices=("json", "plain"), default="json")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("test", help="two-sample test of equal means (JSON)")
    t.add_argument("input1")
    t.add_argument("input2")
    t.add_argument("--method", choices=METHOD_TAGS, default="dpd")
    t.add_argument("--beta", type=_beta, default=None,
                   help=f"tuning parameter for --method dpd (default {DEFAULT_BETA})")
    t.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA)
    t.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--format", choices=("json", "plain"), default="json")
    t.set_defaults(func=cmd_test)

    i = sub.add_parser("influence", help="estimator influence curves as CSV")
    i.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.3, 0.5, 1.0])
    i.add_argument("--mu", type=float, default=0.0)
    i.add_argument("--sigma", type=float, default=1.0)
    i.add_argument("--xmin", type=float, default=1e-3)
    i.add_argument("--xmax", type=float, default=1e3)
    i.add_argument("--points", type=int, default=61)
    i.set_defaults(func=cmd_influence)

    s = sub.add_parser("simulate", help="Monte Carlo level/power study of a preset (CSV)")
    s.add_argument("preset")
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--sizes", type=int, nargs="+", default=None)
    s.add_argument("--alpha", type=_alpha, default=None)
    s.add_argument("--workers", type=int, default=1, help="processes; 0 picks automatically")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="p-values as one observation of input2 is replaced")
    w.add_argument("input1")
    w.add_argument("input2")
    w.add_argument("--index", type=int, default=datasets.BAAQMD_OUTLIER_INDEX)
    w.add_argument("--values", type=_positive_float, nargs="+",
                   default=[float(v) for v in (1, 10, 25, 50, 100, 170, 250, 300, 400, 500)])
    w.add_argument("--format", choices=("csv", "json"), default="csv")
    w.set_defaults(func=cmd_sweep)

    d = sub.add_parser("dataset", help="print an embedded data set, one value per line")
    d.add_argument("name", nargs="?")
    d.set_defaults(func=cmd_dataset)

    pr = sub.add_parser("presets", help="list simulation presets")
    pr.set_defaults(func=cmd_presets)

    r = sub.add_parser("reproduce", help="run the reproduction manifest checks")
    r.add_argument("--id", action="append", help="only this entry (repeatable)")
    r.add_argument("--include-tests", action="store_true",
                   help="also run entries that are checked by the test suite")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None, stdin=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.stdin = stdin
    try:
        args.func(args, out)
    except UsageError as e:
        print(f"lnwald: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, NumericalError, ArithmeticError) as e:
        print(f"lnwald: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        print(f"lnwald: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except _ReproduceFailed:
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
