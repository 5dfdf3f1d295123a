"""Command-line interface.

Subcommands:
  estimate   run one chain on one vintage and persist the draws
  backtest   walk the release calendar, forecasting at every release
  report     turn persisted backtest output into result tables
  simulate   generate a synthetic dataset with vintages and a calendar

Exit codes: 0 success, 2 validation/configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import pandas as pd

from .amwg import problem_for_spec, run_chain
from .backtest import run_backtest, report as make_report
from .config import ModelSpecKind, fast_sampler, load_config
from .errors import (
    ConfigurationError,
    DomainError,
    GaptrackError,
    InitializationError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .simulate import run_simulate
from .vintages import build_panel, load_calendar, load_vintage

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaptrack",
        description="Real-time trend-cycle estimation and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the model on one vintage")
    est.add_argument("--config", required=True, help="YAML configuration file")
    est.add_argument(
        "--spec",
        required=True,
        choices=[k.value for k in ModelSpecKind],
        help="model variant",
    )
    est.add_argument("--vintage", required=True, help="vintage date (YYYY-MM-DD)")
    est.add_argument("--seed", type=int, default=None, help="sampler seed override")
    est.add_argument("--output", default="estimate_out", help="output directory")
    est.add_argument("--fast", action="store_true", help="desk-scale sampler settings")

    bt = sub.add_parser("backtest", help="run the real-time evaluation")
    bt.add_argument("--config", required=True)
    bt.add_argument(
        "--fast",
        action="store_true",
        help="desk-scale sampler settings (2000 sweeps / 1000 burn-in)",
    )

    rep = sub.add_parser("report", help="emit tables from backtest output")
    rep.add_argument("--input", required=True, help="backtest output directory")
    rep.add_argument("--format", choices=["csv", "json"], default="csv")
    rep.add_argument("--dest", default=None, help="destination (default: input dir)")

    sim = sub.add_parser("simulate", help="generate synthetic vintages")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None, help="generator seed override")
    sim.add_argument("--output", default=None, help="output directory override")
    return parser


def _cmd_estimate(args) -> int:
    app = load_config(args.config)
    spec = ModelSpecKind(args.spec)
    sampler = app.sampler
    if args.fast:
        print(
            "warning: --fast uses 2000 sweeps with 1000 burn-in; "
            "reference settings are 10000/5000",
            file=sys.stderr,
        )
        sampler = fast_sampler(sampler)
    if args.seed is not None:
        sampler = replace(sampler, seed=args.seed)

    asof = date.fromisoformat(args.vintage)
    calendar = load_calendar(app.data.calendar)
    eligible = [r for r in calendar.releases() if r[0] <= asof]
    if not eligible:
        raise ValidationError(f"no release at or before {asof}")
    rel_date, vpath = eligible[-1]
    vintage = load_vintage(vpath)

    last_ref = max(
        pd.Period(obs.index[-1], freq="M")
        for obs in vintage.series.values()
        if len(obs)
    )
    start = pd.Period(rel_date, freq="M") - 12 * app.backtest.presample_years
    grid = pd.period_range(start, last_ref, freq="M")
    panel = build_panel(vintage, spec, grid, app.data.series, app.model)

    problem = problem_for_spec(spec, app.model)
    draws = run_chain(sampler, problem, panel, app.model)

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    draws.save_params_csv(outdir / f"draws_{spec.value}_{rel_date.isoformat()}.csv")
    if draws.states is not None:
        draws.save_states_bin(
            outdir / f"states_{spec.value}_{rel_date.isoformat()}.bin"
        )
    summary = {
        "spec": spec.value,
        "release": rel_date.isoformat(),
        "n_retained": draws.n_retained,
        "posterior_mean": dict(
            zip(draws.parameter_names, map(float, draws.posterior_mean()))
        ),
        "acceptance_rate": dict(
            zip(draws.parameter_names, map(float, draws.acceptance_rate(last=2000)))
        ),
    }
    with open(outdir / "estimate_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"estimate: {draws.n_retained} retained draws -> {outdir}")
    return EXIT_OK


def _cmd_backtest(args) -> int:
    app = load_config(args.config)
    if args.fast:
        print(
            "warning: --fast uses 2000 sweeps with 1000 burn-in; "
            "reference settings are 10000/5000",
            file=sys.stderr,
        )
        app.sampler = fast_sampler(app.sampler)
    output = run_backtest(app)
    print(
        f"backtest: {len(output.meta['releases'])} releases, "
        f"{len(output.meta['estimations'])} estimations -> {app.backtest.output_dir}"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    written = make_report(args.input, fmt=args.format, dest=args.dest)
    for path in written:
        print(f"report: wrote {path}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    app = load_config(args.config)
    settings = app.simulate
    if args.seed is not None:
        settings = replace(settings, seed=args.seed)
    if args.output is not None:
        settings = replace(settings, output_dir=Path(args.output))
    result = run_simulate(settings, app.model)
    print(
        f"simulate: {len(result.vintage_paths)} vintages, calendar at "
        f"{result.calendar_path}"
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "estimate": _cmd_estimate,
        "backtest": _cmd_backtest,
        "report": _cmd_report,
        "simulate": _cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError, ConfigurationError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, InitializationError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GaptrackError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
