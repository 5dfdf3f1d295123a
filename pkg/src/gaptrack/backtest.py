"""Real-time backtest engine, forecast scoring, and revision statistics.

The engine walks the release calendar inside the evaluation window. At
every release it rebuilds the panel from that release's vintage (and from
nothing else), re-estimates parameters if the release is the first of its
calendar year, smooths the states, records the gap and potential paths for
every reference month, and projects every observable over the horizon
grid. Forecast points are averages of the predictive mean over a thinned
subset of retained posterior draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from .amwg import EstimationProblem, PosteriorDraws, problem_for_spec, run_chain
from .config import AppConfig, ModelSpecKind, SeriesSpec
from .errors import ConfigurationError, GaptrackError, ValidationError
from .panel import Panel
from .simulate import REDUCED_ROLES, build_reduced_system, reduced_parameter_layout
from .statespace import filter_diffuse, forecast as forecast_states, smoothed_mean
from .vintages import (
    ReleaseCalendar,
    Vintage,
    build_panel,
    check_information_discipline,
    cpi_yoy,
    load_calendar,
    load_vintage,
    _spf_expected_levels,
    _to_period_series,
)

FORECAST_COLUMNS = ["origin", "spec", "series", "target", "horizon", "forecast"]
GAP_COLUMNS = ["spec", "vintage", "month", "gap_pct", "potential"]
TRUTH_COLUMNS = ["series", "target", "value"]
MSFE_COLUMNS = ["spec", "series", "horizon", "msfe", "n", "n_missing"]
REVISION_COLUMNS = [
    "spec",
    "quantity",
    "cutoff",
    "mean_of_std",
    "mean_of_max_abs_revision",
    "n_months",
]


@dataclass
class RevisionStats:
    """Across-vintage dispersion of estimates per reference month, averaged.

    mean_of_std: mean over reference months of the across-vintage sample
    standard deviation. mean_of_max_abs_revision: mean over reference
    months of the largest absolute change between consecutive vintages
    containing that month. Both are zero when every vintage agrees.
    """

    mean_of_std: float
    mean_of_max_abs_revision: float
    n_months: int


def revision_stats(
    estimates_by_vintage: dict[date, pd.Series] | pd.DataFrame,
    cutoff: date | None = None,
) -> RevisionStats:
    """Dispersion of a quantity's estimates across vintages.

    ``estimates_by_vintage`` maps vintage date to a month-indexed series,
    or is a long DataFrame with columns (vintage, month, value). Only
    reference months present in at least two vintages contribute.
    """
    if isinstance(estimates_by_vintage, pd.DataFrame):
        frame = estimates_by_vintage.pivot(index="month", columns="vintage", values="value")
    else:
        frame = pd.DataFrame(
            {v: s for v, s in sorted(estimates_by_vintage.items())}
        )
    if frame.shape[1] < 2:
        raise GaptrackError("revision statistics need at least two vintages")
    frame = frame.sort_index(axis=1)
    if cutoff is not None:
        limit = pd.Period(cutoff, freq="M")
        frame = frame.loc[[m for m in frame.index if pd.Period(m, freq="M") <= limit]]

    counts = frame.notna().sum(axis=1)
    frame = frame.loc[counts >= 2]
    if frame.empty:
        raise GaptrackError("no reference month is shared by two or more vintages")

    stds = frame.std(axis=1, ddof=1)

    def max_abs_consecutive(row: pd.Series) -> float:
        vals = row.dropna().to_numpy(dtype=float)
        return float(np.max(np.abs(np.diff(vals)))) if len(vals) >= 2 else np.nan

    revs = frame.apply(max_abs_consecutive, axis=1).dropna()
    return RevisionStats(
        mean_of_std=float(stds.mean()),
        mean_of_max_abs_revision=float(revs.mean()),
        n_months=int(frame.shape[0]),
    )


def natural_truth(
    vintage: Vintage,
    roles: list[str],
    series_config: dict[str, SeriesSpec],
) -> pd.DataFrame:
    """Transformed outturn values in natural units, one row per observation."""
    rows = []
    gdp_native = None
    if "gdp" in series_config:
        cfg = series_config["gdp"]
        gdp_native = _to_period_series(vintage.get(cfg.id), cfg.frequency)
    for role in roles:
        cfg = series_config[role]
        native = _to_period_series(vintage.get(cfg.id), cfg.frequency)
        if role == "spf_gdp":
            native = _spf_expected_levels(native, gdp_native, cfg)
        elif cfg.transform == "yoy_from_index" and not native.empty:
            native = cpi_yoy(pd.Series(native.to_numpy(), index=native.index))
        for period, value in native.items():
            month = (
                period.asfreq("M", how="end")
                if period.freqstr.startswith("Q")
                else period
            )
            rows.append({"series": role, "target": str(month), "value": float(value)})
    return pd.DataFrame(rows, columns=TRUTH_COLUMNS)


def first_release_truth(
    calendar: ReleaseCalendar,
    roles: list[str],
    series_config: dict[str, SeriesSpec],
) -> pd.DataFrame:
    """First-published value per (series, reference month), over all releases."""
    seen: dict[tuple[str, str], float] = {}
    for rel_date, path in calendar.releases():
        vintage = load_vintage(path)
        frame = natural_truth(vintage, roles, series_config)
        for rec in frame.itertuples():
            key = (rec.series, rec.target)
            if key not in seen:
                seen[key] = rec.value
    rows = [
        {"series": s, "target": t, "value": v} for (s, t), v in sorted(seen.items())
    ]
    return pd.DataFrame(rows, columns=TRUTH_COLUMNS)


def msfe(
    records: pd.DataFrame,
    truth: Vintage | pd.DataFrame,
    roles: list[str] | None = None,
    series_config: dict[str, SeriesSpec] | None = None,
) -> pd.DataFrame:
    """Mean squared forecast error per (spec, series, horizon).

    Targets absent from the truth set are excluded from the average and
    counted in n_missing; cells with no evaluable target are omitted
    entirely rather than reported as zero.
    """
    if isinstance(truth, Vintage):
        if roles is None or series_config is None:
            raise ConfigurationError(
                "scoring against a Vintage needs roles and series_config"
            )
        truth = natural_truth(truth, roles, series_config)
    lookup = {(r.series, r.target): r.value for r in truth.itertuples()}

    rows = []
    if len(records):
        grouped = records.groupby(["spec", "series", "horizon"], sort=True)
        for (spec, series, horizon), grp in grouped:
            errors = []
            missing = 0
            for rec in grp.itertuples():
                actual = lookup.get((series, rec.target))
                if actual is None:
                    missing += 1
                else:
                    errors.append((rec.forecast - actual) ** 2)
            if errors:
                rows.append(
                    {
                        "spec": spec,
                        "series": series,
                        "horizon": int(horizon),
                        "msfe": float(np.mean(errors)),
                        "n": len(errors),
                        "n_missing": missing,
                    }
                )
    return pd.DataFrame(rows, columns=MSFE_COLUMNS)


@dataclass
class BacktestOutput:
    forecasts: pd.DataFrame
    gap_paths: pd.DataFrame
    truth: pd.DataFrame
    msfe_table: pd.DataFrame
    revision_table: pd.DataFrame
    meta: dict

    def save(self, outdir: Path) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "forecasts.csv", self.forecasts, FORECAST_COLUMNS)
        _write_csv(outdir / "gap_paths.csv", self.gap_paths, GAP_COLUMNS)
        _write_csv(outdir / "truth.csv", self.truth, TRUTH_COLUMNS)
        _write_csv(outdir / "msfe.csv", self.msfe_table, MSFE_COLUMNS)
        _write_csv(outdir / "revision_stats.csv", self.revision_table, REVISION_COLUMNS)
        with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)


def _write_csv(path: Path, frame: pd.DataFrame, columns: list[str]) -> None:
    """Deterministic CSV writer: fixed column order, repr floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        if frame is None or frame.empty:
            return
        for rec in frame[columns].itertuples(index=False):
            out = []
            for v in rec:
                if isinstance(v, float):
                    out.append(repr(v))
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def _read_csv(path: Path, float_cols: list[str], int_cols: list[str] = ()) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype=str)
    for col in float_cols:
        if col in frame.columns:
            frame[col] = frame[col].astype(float)
    for col in int_cols:
        if col in frame.columns:
            frame[col] = frame[col].astype(int)
    return frame


def _reduced_series_config() -> dict[str, SeriesSpec]:
    return {
        "gdp": SeriesSpec(id="SYN_GDP", frequency="Q"),
        "unemployment": SeriesSpec(id="SYN_UNEMP", frequency="M"),
        "oil": SeriesSpec(id="SYN_OIL", frequency="M"),
        "cpi": SeriesSpec(id="SYN_CPI", frequency="M"),
    }


def _build_reduced_panel(vintage: Vintage, grid, series_config) -> Panel:
    roles = list(REDUCED_ROLES)
    n = len(grid)
    values = np.full((n, len(roles)), np.nan)
    mask = np.zeros((n, len(roles)), dtype=bool)
    scales = np.ones(len(roles))
    pos = {p: i for i, p in enumerate(grid)}
    from .panel import first_difference_scale

    for r, role in enumerate(roles):
        cfg = series_config[role]
        native = _to_period_series(vintage.get(cfg.id), cfg.frequency)
        if native.empty:
            continue
        scale = first_difference_scale(native)
        scales[r] = scale
        for period, value in native.items():
            month = (
                period.asfreq("M", how="end")
                if period.freqstr.startswith("Q")
                else period
            )
            if month in pos:
                values[pos[month], r] = float(value) / scale
                mask[pos[month], r] = True
    return Panel(values=values, mask=mask, start=grid[0], series=roles, scales=scales)


@dataclass
class _ModelLane:
    """One model variant being backtested."""

    label: str
    problem: EstimationProblem
    build_panel: callable
    gap_states: tuple[str, str | None, str]  # (cycle, idio or None, trend)


def _lanes(app: AppConfig) -> list[_ModelLane]:
    bt = app.backtest
    if bt.family == "reduced":
        series_config = _reduced_series_config()
        problem = EstimationProblem(
            layout=reduced_parameter_layout(app.model),
            build=lambda v: build_reduced_system(v, app.model),
            name="reduced",
        )
        return [
            _ModelLane(
                label="reduced",
                problem=problem,
                build_panel=lambda vint, grid: _build_reduced_panel(
                    vint, grid, series_config
                ),
                gap_states=("cycle_gap", None, "trend_gdp"),
            )
        ]
    lanes = []
    for spec in bt.specs:
        problem = problem_for_spec(spec, app.model)
        lanes.append(
            _ModelLane(
                label=spec.value,
                problem=problem,
                build_panel=lambda vint, grid, s=spec: build_panel(
                    vint, s, grid, app.data.series, app.model
                ),
                gap_states=("cycle_gap", "idio_gdp", "trend_gdp"),
            )
        )
    return lanes


def _predictive_indices(n_retained: int, n_draws: int) -> np.ndarray:
    if n_draws <= 0 or n_draws >= n_retained:
        return np.arange(n_retained)
    return np.unique(np.linspace(0, n_retained - 1, n_draws).round().astype(int))


def _gap_and_potential(lane, system, state_mean, scales, roles):
    sidx = system.layout
    cycle, idio, trend = lane.gap_states
    gap = state_mean[:, sidx[cycle]]
    if idio is not None:
        gap = gap + state_mean[:, sidx[idio]]
    potential = state_mean[:, sidx[trend]]
    gdp_scale = scales[roles.index("gdp")]
    return 100.0 * gap / potential, potential * gdp_scale


def run_backtest(app: AppConfig) -> BacktestOutput:
    """Iterate the release calendar and evaluate every configured variant."""
    bt = app.backtest
    calendar = load_calendar(app.data.calendar)
    window = calendar.window(bt.start, bt.end)
    releases = window.releases()
    if not releases:
        raise ValidationError("no releases inside the backtest window")

    grid_start = pd.Period(bt.start, freq="M") - 12 * bt.presample_years
    lanes = _lanes(app)

    sampler_base = replace(app.sampler, state_draws_enabled=False)
    quarterly_roles = {
        role
        for role, cfg in (
            _reduced_series_config() if bt.family == "reduced" else app.data.series
        ).items()
        if cfg.frequency == "Q"
    }

    forecast_rows = []
    gap_rows = []
    estimations = []
    skipped = []

    params_dir = Path(bt.output_dir) / "params"
    for lane_idx, lane in enumerate(lanes):
        params_by_year: dict[int, np.ndarray] = {}
        draws_by_year: dict[int, PosteriorDraws] = {}
        for rel_date, vpath in releases:
            try:
                vintage = load_vintage(vpath)
            except FileNotFoundError:
                raise ValidationError(
                    f"vintage file {vpath} for release {rel_date} is missing"
                ) from None
            last_ref = max(
                (
                    pd.Period(obs.index[-1], freq="M")
                    for obs in vintage.series.values()
                    if len(obs)
                ),
                default=None,
            )
            if last_ref is None:
                continue
            grid = pd.period_range(grid_start, last_ref, freq="M")
            panel = lane.build_panel(vintage, grid)
            check_information_discipline(panel, rel_date)

            year = rel_date.year
            if year not in params_by_year:
                seed = sampler_base.seed + 1009 * year + 97 * lane_idx
                cfg = replace(sampler_base, seed=seed)
                try:
                    draws = run_chain(cfg, lane.problem, panel)
                except GaptrackError:
                    if bt.skip_failed_estimations:
                        skipped.append(
                            {"spec": lane.label, "release": rel_date.isoformat()}
                        )
                        continue
                    raise
                params_by_year[year] = draws.posterior_mean()
                draws_by_year[year] = draws
                params_dir.mkdir(parents=True, exist_ok=True)
                draws.save_params_csv(params_dir / f"{lane.label}_{year}.csv")
                estimations.append(
                    {
                        "spec": lane.label,
                        "year": year,
                        "release": rel_date.isoformat(),
                    }
                )
            params = params_by_year[year]
            draws = draws_by_year[year]

            system = lane.problem.build(params)
            state_mean = smoothed_mean(system, panel)
            gap_pct, potential = _gap_and_potential(
                lane, system, state_mean, panel.scales, panel.series
            )
            for t, month in enumerate(panel.months):
                gap_rows.append(
                    {
                        "spec": lane.label,
                        "vintage": rel_date.isoformat(),
                        "month": str(month),
                        "gap_pct": float(gap_pct[t]),
                        "potential": float(potential[t]),
                    }
                )

            subset = _predictive_indices(draws.n_retained, bt.n_predictive_draws)
            acc = np.zeros((bt.horizons, panel.n_series))
            for di in subset:
                sys_d = lane.problem.build(draws.parameters[di])
                filt = filter_diffuse(sys_d, panel)
                fc = forecast_states(
                    sys_d,
                    filt.filtered_mean[-1],
                    filt.filtered_cov[-1],
                    bt.horizons,
                )
                acc += fc.obs_mean
            acc /= len(subset)
            acc = acc * panel.scales

            origin = panel.months[-1]
            for h in range(1, bt.horizons + 1):
                target = origin + h
                for r, role in enumerate(panel.series):
                    if role in quarterly_roles and target.month not in (3, 6, 9, 12):
                        continue
                    forecast_rows.append(
                        {
                            "origin": rel_date.isoformat(),
                            "spec": lane.label,
                            "series": role,
                            "target": str(target),
                            "horizon": h,
                            "forecast": float(acc[h - 1, r]),
                        }
                    )

    forecasts = pd.DataFrame(forecast_rows, columns=FORECAST_COLUMNS)
    gap_paths = pd.DataFrame(gap_rows, columns=GAP_COLUMNS)

    series_config = (
        _reduced_series_config() if bt.family == "reduced" else app.data.series
    )
    roles = (
        list(REDUCED_ROLES) if bt.family == "reduced" else observable_union(bt.specs)
    )

    if bt.truth == "first_release":
        truth = first_release_truth(calendar, roles, series_config)
    else:
        truth_release = _resolve_truth_release(calendar, bt.truth_vintage)
        truth_vintage = load_vintage(truth_release[1])
        truth = natural_truth(truth_vintage, roles, series_config)

    msfe_table = msfe(forecasts, truth)
    revision_table = _revision_table(gap_paths, bt.revision_cutoffs)

    meta = {
        "releases": [d.isoformat() for d, _ in releases],
        "estimations": estimations,
        "skipped": skipped,
        "family": bt.family,
        "specs": [lane.label for lane in lanes],
        "horizons": bt.horizons,
        "truth": bt.truth,
    }
    output = BacktestOutput(
        forecasts=forecasts,
        gap_paths=gap_paths,
        truth=truth,
        msfe_table=msfe_table,
        revision_table=revision_table,
        meta=meta,
    )
    output.save(bt.output_dir)
    return output


def observable_union(specs: list[ModelSpecKind]) -> list[str]:
    from .model import observable_roles

    seen: list[str] = []
    for spec in specs:
        for role in observable_roles(spec):
            if role not in seen:
                seen.append(role)
    return seen


def _resolve_truth_release(calendar: ReleaseCalendar, truth_vintage: date | None):
    releases = calendar.releases()
    if truth_vintage is None:
        return releases[-1]
    eligible = [r for r in releases if r[0] <= truth_vintage]
    if not eligible:
        raise ValidationError(f"no release at or before truth vintage {truth_vintage}")
    return eligible[-1]


def _revision_table(gap_paths: pd.DataFrame, cutoffs: list[date]) -> pd.DataFrame:
    rows = []
    if gap_paths.empty:
        return pd.DataFrame(rows, columns=REVISION_COLUMNS)
    for spec, grp in gap_paths.groupby("spec", sort=True):
        for quantity in ("gap_pct", "potential"):
            long = grp.rename(columns={quantity: "value"})[["vintage", "month", "value"]]
            for cutoff in [None, *cutoffs]:
                try:
                    stats = revision_stats(long, cutoff=cutoff)
                except GaptrackError:
                    continue
                rows.append(
                    {
                        "spec": spec,
                        "quantity": quantity,
                        "cutoff": cutoff.isoformat() if cutoff else "none",
                        "mean_of_std": stats.mean_of_std,
                        "mean_of_max_abs_revision": stats.mean_of_max_abs_revision,
                        "n_months": stats.n_months,
                    }
                )
    return pd.DataFrame(rows, columns=REVISION_COLUMNS)


def report(source: BacktestOutput | Path | str, fmt: str = "csv", dest=None) -> list[Path]:
    """Emit result tables from a backtest output or its persisted directory.

    csv: msfe.csv, revision_stats.csv, gap_paths.csv and summary.json in
    the destination. json: everything bundled into report.json. Output is
    byte-deterministic for identical inputs.
    """
    if fmt not in ("csv", "json"):
        raise ConfigurationError("report format must be 'csv' or 'json'")
    if isinstance(source, (str, Path)):
        indir = Path(source)
        forecasts = _read_csv(indir / "forecasts.csv", ["forecast"], ["horizon"])
        gap_paths = _read_csv(indir / "gap_paths.csv", ["gap_pct", "potential"])
        truth = _read_csv(indir / "truth.csv", ["value"])
        meta = json.loads((indir / "summary.json").read_text())
        msfe_table = msfe(forecasts, truth)
        cutoffs = []
        revision_table = _revision_table(gap_paths, cutoffs)
        output = BacktestOutput(
            forecasts=forecasts,
            gap_paths=gap_paths,
            truth=truth,
            msfe_table=msfe_table,
            revision_table=revision_table,
            meta=meta,
        )
        dest = Path(dest) if dest is not None else indir
    else:
        output = source
        if dest is None:
            raise ConfigurationError("report needs a destination directory")
        dest = Path(dest)

    dest.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        _write_csv(dest / "msfe.csv", output.msfe_table, MSFE_COLUMNS)
        _write_csv(dest / "revision_stats.csv", output.revision_table, REVISION_COLUMNS)
        _write_csv(dest / "gap_paths.csv", output.gap_paths, GAP_COLUMNS)
        with open(dest / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(output.meta, fh, indent=2, sort_keys=True)
        written = [
            dest / "msfe.csv",
            dest / "revision_stats.csv",
            dest / "gap_paths.csv",
            dest / "summary.json",
        ]
    else:
        doc = {
            "meta": output.meta,
            "msfe": output.msfe_table.to_dict(orient="records"),
            "revision_stats": output.revision_table.to_dict(orient="records"),
            "gap_paths": output.gap_paths.to_dict(orient="records"),
        }
        path = dest / "report.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        written = [path]
    return written
