"""
Command-line front end.

    evtwcct fit       trace -> threshold scan -> tail fit -> report + diagnostics CSVs
    evtwcct predict   report -> return levels, return period, exceedance odds
    evtwcct compare   trace -> Jeffreys baseline vs tail prediction, one CSV row
    evtwcct simulate  seeded settle-time campaign -> trace CSV + metadata JSON
    evtwcct diagnose  trace + report -> QQ / density / MRL / return-level CSVs

Exit codes: 0 success, 1 input or environment error, 2 statistical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import compare_to_baseline, write_comparison_csv
from .diagnostics import (classify_tail, density_overlay, extrapolation_bound, qq_points,
                          write_density_csv, write_qq_csv)
from .errors import (AllRunsFailed, BelowThreshold, DegenerateTrace, EmptyTrace, FitDiverged,
                     InfinitePeriod, NeverAccepted, NoValidThreshold, NumericBlowup, ParseError,
                     SingularInformation, TooFewExceedances)
from .predict import (DEFAULT_HORIZONS, exceedance_probability, return_level_curve,
                      return_period, validate_fit, write_curve_csv)
from .tailfit import GpdFit, format_estimate, gpd_to_gev
from .threshold import (ThresholdPolicy, extract_excesses, mean_residual_life, select_threshold,
                        write_mrl_csv)
from .trace import load_trace, summarize, write_trace
from .workloads import SimConfig, run_campaign

EXIT_OK, EXIT_INPUT, EXIT_STATS = 0, 1, 2
S_GRID = (1, 10, 100, 1000)

STAT_ERRORS = (NoValidThreshold, BelowThreshold, NeverAccepted, AllRunsFailed, DegenerateTrace,
               InfinitePeriod, SingularInformation, TooFewExceedances, FitDiverged, NumericBlowup)
INPUT_ERRORS = (FileNotFoundError, ParseError, EmptyTrace, OSError, ValueError, KeyError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors (exit 1); 2 is reserved for statistical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        values = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _policy(text):
    try:
        return ThresholdPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _column(text):
    return int(text) if text.lstrip("-").isdigit() else text


def g4(x):
    """Human-table number format (4 significant digits)."""
    return "" if x is None else f"{x:.4g}"


def pct(p):
    """Probability as a percentage with one decimal, e.g. ``10.7%``."""
    return f"{100.0 * p:.1f}%"


def _dump(obj, path):
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _step_dict(step):
    return {"u": step.u, "n_exceed": step.n_exceed, "valid": step.valid,
            "reasons": list(step.reasons)}


def _exceedance_table(fit, levels):
    rows = []
    for level in levels:
        rows.append({"level": level,
                     "probabilities": {str(s): exceedance_probability(fit, level, s) for s in S_GRID}})
    return rows


def _load_report(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such report: {path}")
    report = json.loads(path.read_text())
    if "fit" not in report:
        raise ValueError(f"{path} is not a fit report")
    return report, GpdFit.from_dict(report["fit"])


def cmd_fit(args) -> int:
    trace = load_trace(args.input, args.column, unit=args.unit)
    summary = summarize(trace)
    trail = []
    try:
        u, fit = select_threshold(trace, args.threshold, trail=trail)
    except NoValidThreshold as exc:
        _write_failed_scan(args, trace, summary, exc.trail or trail)
        raise
    verdict = validate_fit(fit, args.horizons)
    curve = return_level_curve(fit, args.horizons, args.ci_level)
    excesses = extract_excesses(trace, u)
    qq = qq_points(fit, excesses)
    bound = extrapolation_bound(fit, qq)
    hist, model = density_overlay(fit, excesses, bins=args.bins)
    grid = np.linspace(summary.mean, np.sort(trace.samples)[-3], 50) if len(trace) > 3 else []
    mrl = mean_residual_life(trace, np.unique(grid)) if len(grid) else []
    tail = classify_tail(fit.xi)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"qq": "qq.csv", "density": "density.csv", "returnlevel": "returnlevel.csv",
             "mrl": "mrl.csv"}
    write_qq_csv(qq, out / files["qq"])
    write_density_csv(hist, model, out / files["density"])
    write_curve_csv(curve, out / files["returnlevel"])
    write_mrl_csv(mrl, out / files["mrl"])

    report = {
        "tool": "evtwcct",
        "version": __version__,
        "command": "fit",
        "seed": args.seed,
        "input": {"path": str(args.input), "column": args.column, "unit": trace.unit},
        "summary": summary.__dict__,
        "threshold": {"policy": args.threshold.describe(), "u": u,
                      "trail": [_step_dict(s) for s in trail]},
        "fit": fit.to_dict(),
        "fit_display": {"sigma_hat": format_estimate(fit.sigma_hat, fit.se_sigma),
                        "xi": format_estimate(fit.xi, fit.se_xi)},
        "gev": gpd_to_gev(fit, args.block_size).__dict__ if args.block_size else None,
        "verdict": verdict.to_dict(),
        "tail_type": {"kind": tail.kind.value, "guarantee_note": tail.guarantee_note.value},
        "extrapolation_bound": bound,
        "return_levels": [dict(p._asdict(), beyond_validated_range=p.level > bound)
                          for p in curve.points],
        "exceedance": _exceedance_table(fit, curve.levels()),
        "ci_level": args.ci_level,
        "files": files,
    }
    _dump(report, out / "report.json")

    print(f"threshold u = {g4(u)} ({fit.n_exceed} of {fit.n_total} samples exceed)")
    print(f"scale = {report['fit_display']['sigma_hat']}, shape = {report['fit_display']['xi']}")
    print(f"tail type: {tail.kind.value} ({tail.guarantee_note.value}); "
          f"extrapolation validated up to {g4(bound)}")
    _print_curve(curve, bound)
    if not verdict.valid:
        print("fit is not valid: " + ", ".join(verdict.to_dict()["reasons"]), file=sys.stderr)
        return EXIT_STATS
    return EXIT_OK


def _write_failed_scan(args, trace, summary, trail):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump({"tool": "evtwcct", "version": __version__, "command": "fit", "seed": args.seed,
           "input": {"path": str(args.input), "column": args.column, "unit": trace.unit},
           "summary": summary.__dict__,
           "threshold": {"policy": args.threshold.describe(), "u": None,
                         "trail": [_step_dict(s) for s in trail]},
           "fit": None, "verdict": {"valid": False, "reasons": ["NoValidThreshold"]}},
          out / "report.json")


def _print_curve(curve, bound=None):
    print(f"{'m':>8} {'level':>10} {'ci_low':>10} {'ci_high':>10}")
    for p in curve.points:
        flag = "  beyond validated range" if bound is not None and p.level > bound else ""
        print(f"{p.m:>8} {g4(p.level):>10} {g4(p.ci_low):>10} {g4(p.ci_high):>10}{flag}")


def cmd_predict(args) -> int:
    report, fit = _load_report(args.report)
    verdict = validate_fit(fit, args.horizons)
    if not verdict.valid:
        print("report does not hold a valid fit: " + ", ".join(verdict.to_dict()["reasons"]),
              file=sys.stderr)
        return EXIT_STATS
    curve = return_level_curve(fit, args.horizons, args.ci_level)
    _print_curve(curve, report.get("extrapolation_bound"))
    result = {"tool": "evtwcct", "version": __version__, "command": "predict",
              "report": str(args.report), "ci_level": args.ci_level,
              "return_levels": curve.to_rows(), "verdict": verdict.to_dict(),
              "exceedance": _exceedance_table(fit, curve.levels())}
    if args.level is not None:
        period = return_period(fit, args.level)
        probs = [exceedance_probability(fit, args.level, s) for s in S_GRID]
        print(f"level {g4(args.level)}: return period {g4(period.period)} queries, "
              f"next-query likelihood {100 * period.p:.2g}%")
        print(f"chance of reaching {g4(args.level)} or more in the next "
              f"{', '.join(str(s) for s in S_GRID)} queries: {', '.join(pct(p) for p in probs)}")
        result["level"] = {"level": args.level, "return_period": period.period,
                           "p": period.p,
                           "probabilities": {str(s): p for s, p in zip(S_GRID, probs)}}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_curve_csv(curve, out / "returnlevel.csv")
        _dump(result, out / "predict.json")
    return EXIT_OK


def cmd_compare(args) -> int:
    trace = load_trace(args.input, args.column, unit=args.unit)
    row = compare_to_baseline(trace, args.horizons, args.bayes_factor, args.confidence,
                              policy=args.threshold, label=args.label or Path(args.input).stem)
    print(f"b = {row.b}, T_b = {g4(row.T_b)}, u = {g4(row.u)}, "
          f"sigma_hat = {g4(row.sigma_hat)}, xi = {g4(row.xi)}")
    print(f"{'m':>8} {'T_m':>10} {'RL_m':>10} {'Error_m':>8}")
    for m, t, rl, e in zip(row.horizons, row.T, row.RL, row.error):
        err = "" if e is None else f"{e:+.2f}"
        print(f"{m:>8} {g4(t):>10} {g4(rl):>10} {err:>8}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_comparison_csv([row], args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    overrides = {}
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.disturbance_range is not None:
        overrides["disturbance_range"] = args.disturbance_range
    if args.gains is not None:
        overrides["controller_gains"] = tuple(args.gains)
    if args.initial_state is not None:
        overrides["initial_state"] = tuple(args.initial_state)
    template = SimConfig.default(args.system, **overrides)
    trace = run_campaign(args.system, args.runs, args.seed, template)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out, header="settle_time")
    meta = dict(trace.meta, tool="evtwcct", version=__version__, seed=args.seed,
                settled_runs=len(trace))
    _dump(meta, out.with_suffix(".meta.json"))
    s = summarize(trace)
    print(f"{len(trace)} of {args.runs} runs settled; mean {g4(s.mean)}, "
          f"std {g4(s.std_dev)}, max {g4(s.max)}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    trace = load_trace(args.input, args.column)
    _, fit = _load_report(args.report)
    excesses = extract_excesses(trace, fit.u)
    qq = qq_points(fit, excesses)
    hist, model = density_overlay(fit, excesses, bins=args.bins)
    summary = summarize(trace)
    grid = np.unique(np.linspace(summary.mean, np.sort(trace.samples)[-min(3, len(trace))], 50))
    mrl = mean_residual_life(trace, grid)
    curve = return_level_curve(fit, args.horizons, args.ci_level)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_qq_csv(qq, out / "qq.csv")
    write_density_csv(hist, model, out / "density.csv")
    write_mrl_csv(mrl, out / "mrl.csv")
    write_curve_csv(curve, out / "returnlevel.csv")
    tail = classify_tail(fit.xi)
    print(f"tail type: {tail.kind.value} ({tail.guarantee_note.value})")
    print(f"extrapolation validated up to {g4(extrapolation_bound(fit, qq))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evtwcct", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="trace CSV")
            p.add_argument("--column", type=_column, default=0, help="column index or header name")
            p.add_argument("--unit", default="", help="unit label carried into reports")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--horizons", type=_int_list, default=list(DEFAULT_HORIZONS))
        p.add_argument("--ci-level", type=float, default=0.95,
                       help="confidence level of return-level intervals")

    p = sub.add_parser("fit", help="select threshold, fit tail, write report")
    common(p)
    p.add_argument("--threshold", type=_policy, default=ThresholdPolicy())
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--block-size", type=int, default=None,
                   help="also report GEV parameters for maxima of blocks of this size")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="return levels and exceedance odds from a report")
    common(p, needs_input=False)
    p.add_argument("--report", required=True)
    p.add_argument("--level", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="compare against the Jeffreys sequential baseline")
    common(p)
    p.set_defaults(horizons=list(DEFAULT_HORIZONS[1:]))
    p.add_argument("--threshold", type=_policy, default=ThresholdPolicy())
    p.add_argument("--bayes-factor", type=float, default=100.0)
    p.add_argument("--confidence", type=float, default=0.95, help="Jeffreys theta")
    p.add_argument("--label", default=None)
    p.add_argument("--out", default=None, help="comparison CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="run a seeded settle-time campaign")
    p.add_argument("--system", choices=("pendulum", "tora"), required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="trace CSV (metadata goes next to it)")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--disturbance-range", type=float, default=None)
    p.add_argument("--gains", type=_float_list, default=None)
    p.add_argument("--initial-state", type=_float_list, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="write diagnostic plot data for a fitted report")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=30)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except STAT_ERRORS as exc:
        print(f"evtwcct: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STATS
    except INPUT_ERRORS as exc:
        print(f"evtwcct: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
