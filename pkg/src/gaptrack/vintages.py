"""Real-time data vintages: loading, transformations, and panel assembly.

A vintage is the full data snapshot as of one release date. Panels are
built from exactly one vintage, so anything the model sees at a given
origin was genuinely available then; a separate check enforces that
discipline against adversarially constructed inputs.

Transformations applied on the way into the panel:
  - consumer prices may arrive as an index and become year-over-year
    percentage growth;
  - survey output growth expectations become expected levels by scaling
    the latest output level available in the same vintage, so revisions
    to history move the expectation series even when the survey is
    unchanged;
  - every series is normalized by the standard deviation of its first
    differences within the vintage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from .config import ModelConfig, ModelSpecKind, SeriesSpec, default_series_map
from .errors import ConfigurationError, DomainError, ParseError, ValidationError
from .model import observable_roles
from .panel import Panel, first_difference_scale

VINTAGE_HEADER = ["series_id", "reference_date", "value"]
CALENDAR_HEADER = ["release_date", "series_id", "vintage_file"]


@dataclass(frozen=True)
class Vintage:
    """Snapshot of all series as of ``vintage_date``.

    Each series maps to a float Series indexed by reference date,
    strictly increasing, with no reference after the vintage date.
    """

    vintage_date: date
    series: dict[str, pd.Series] = field(default_factory=dict)

    def __post_init__(self):
        for sid, obs in self.series.items():
            if obs.empty:
                continue
            idx = obs.index
            if not idx.is_monotonic_increasing or idx.has_duplicates:
                raise ValidationError(
                    f"series {sid}: reference periods must be strictly increasing"
                )
            last = idx[-1].date() if hasattr(idx[-1], "date") else idx[-1]
            if last > self.vintage_date:
                raise ValidationError(
                    f"series {sid}: observation for {last} postdates the vintage "
                    f"({self.vintage_date})"
                )
            if not np.all(np.isfinite(obs.to_numpy(dtype=float))):
                raise ValidationError(f"series {sid}: non-finite value")

    def get(self, sid: str) -> pd.Series:
        return self.series.get(sid, pd.Series(dtype=float))

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# vintage_date: {self.vintage_date.isoformat()}\n")
            fh.write(",".join(VINTAGE_HEADER) + "\n")
            for sid in sorted(self.series):
                for ts, value in self.series[sid].items():
                    fh.write(f"{sid},{ts.date().isoformat()},{float(value)!r}\n")


def load_vintage(path, vintage_date: date | None = None) -> Vintage:
    """Parse a vintage CSV; an explicit date overrides the file header.

    Format: optional ``# vintage_date: YYYY-MM-DD`` comment, then a
    ``series_id,reference_date,value`` header and one observation per row
    (ISO dates, plain decimal values).
    """
    path = Path(path)
    rows: dict[str, list[tuple[pd.Timestamp, float]]] = {}
    file_date: date | None = None
    with open(path, "r", encoding="utf-8") as fh:
        lineno = 0
        header_seen = False
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("vintage_date:"):
                    try:
                        file_date = date.fromisoformat(
                            body.split(":", 1)[1].strip()
                        )
                    except ValueError:
                        raise ParseError("bad vintage_date header", line=lineno)
                continue
            parts = [p.strip() for p in line.split(",")]
            if not header_seen:
                if parts != VINTAGE_HEADER:
                    raise ParseError(
                        f"expected header {','.join(VINTAGE_HEADER)}", line=lineno
                    )
                header_seen = True
                continue
            if len(parts) != 3:
                raise ParseError("expected 3 comma-separated fields", line=lineno)
            sid, ref_str, val_str = parts
            try:
                ref = pd.Timestamp(date.fromisoformat(ref_str))
            except ValueError:
                raise ParseError(f"bad reference_date {ref_str!r}", line=lineno)
            try:
                value = float(val_str)
            except ValueError:
                raise ParseError(f"bad value {val_str!r}", line=lineno)
            rows.setdefault(sid, []).append((ref, value))
    if not header_seen:
        raise ParseError("missing header", line=1)

    resolved = vintage_date or file_date
    if resolved is None:
        raise ValidationError(
            f"{path}: vintage date not supplied and no vintage_date header present"
        )

    series = {}
    for sid, obs in rows.items():
        idx = pd.DatetimeIndex([t for t, _ in obs])
        if idx.has_duplicates:
            dup = idx[idx.duplicated()][0]
            raise ValidationError(
                f"series {sid}: duplicate reference period {dup.date()}"
            )
        s = pd.Series([v for _, v in obs], index=idx).sort_index()
        series[sid] = s
    return Vintage(vintage_date=resolved, series=series)


@dataclass(frozen=True)
class CalendarEntry:
    release_date: date
    series_id: str
    vintage_file: str


@dataclass
class ReleaseCalendar:
    """Ordered data releases, each pointing at a vintage snapshot file."""

    entries: list[CalendarEntry]
    base_dir: Path = Path(".")

    def __post_init__(self):
        dates = [e.release_date for e in self.entries]
        if any(b < a for a, b in zip(dates, dates[1:])):
            raise ValidationError("release calendar timestamps must be nondecreasing")

    def releases(self) -> list[tuple[date, Path]]:
        """Unique (release date, vintage path) pairs in calendar order."""
        seen = set()
        out = []
        for e in self.entries:
            key = (e.release_date, e.vintage_file)
            if key not in seen:
                seen.add(key)
                out.append((e.release_date, self.base_dir / e.vintage_file))
        return out

    def window(self, start: date, end: date) -> "ReleaseCalendar":
        kept = [e for e in self.entries if start <= e.release_date <= end]
        return ReleaseCalendar(entries=kept, base_dir=self.base_dir)


def load_calendar(path) -> ReleaseCalendar:
    path = Path(path)
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        lineno = 0
        header_seen = False
        for parts in reader:
            lineno += 1
            if not parts:
                continue
            parts = [p.strip() for p in parts]
            if not header_seen:
                if parts != CALENDAR_HEADER:
                    raise ParseError(
                        f"expected header {','.join(CALENDAR_HEADER)}", line=lineno
                    )
                header_seen = True
                continue
            if len(parts) != 3:
                raise ParseError("expected 3 comma-separated fields", line=lineno)
            try:
                rel = date.fromisoformat(parts[0])
            except ValueError:
                raise ParseError(f"bad release_date {parts[0]!r}", line=lineno)
            entries.append(
                CalendarEntry(release_date=rel, series_id=parts[1], vintage_file=parts[2])
            )
    return ReleaseCalendar(entries=entries, base_dir=path.parent)


def spf_gdp_levels(expected_growth: float, latest_gdp_level: float) -> float:
    """Expected output level implied by a one-year-ahead growth expectation.

    The level anchor is whatever the same vintage currently says output
    was, so the result moves with data revisions even for an unchanged
    survey response.
    """
    if latest_gdp_level <= 0:
        raise DomainError(
            f"latest output level must be positive, got {latest_gdp_level}"
        )
    return latest_gdp_level * (1.0 + expected_growth)


def cpi_yoy(index_series: pd.Series) -> pd.Series:
    """Year-over-year percentage growth of a monthly price index."""
    if len(index_series) < 13:
        raise ValidationError("need at least 13 monthly index observations")
    vals = index_series.to_numpy(dtype=float)
    if np.any(vals <= 0):
        raise DomainError("price index values must be positive")
    s = index_series.copy()
    if not isinstance(s.index, pd.PeriodIndex):
        s.index = pd.PeriodIndex(s.index, freq="M")
    base = s.copy()
    base.index = base.index + 12
    out = 100.0 * (s / base.reindex(s.index) - 1.0)
    return out.dropna()


def _to_period_series(obs: pd.Series, freq: str) -> pd.Series:
    """Index observations by native-frequency period (quarter or month)."""
    if obs.empty:
        return pd.Series(dtype=float)
    periods = pd.PeriodIndex(obs.index, freq=freq)
    if periods.has_duplicates:
        raise ValidationError("two observations fall in the same reference period")
    return pd.Series(obs.to_numpy(dtype=float), index=periods)


def _spf_expected_levels(
    growth: pd.Series, gdp: pd.Series, spec: SeriesSpec
) -> pd.Series:
    """Per survey quarter, scale the latest available output level."""
    if growth.empty:
        return pd.Series(dtype=float)
    if gdp.empty:
        raise ValidationError(
            "survey growth expectations need an output series in the same vintage"
        )
    out = {}
    for q, g in growth.items():
        g = float(g)
        if spec.growth_units == "percent":
            g = g / 100.0
        anchor = gdp[gdp.index <= q]
        if anchor.empty:
            continue
        level = float(anchor.iloc[-1])
        if spec.compounding == "compound4":
            if level <= 0:
                raise DomainError(f"latest output level must be positive, got {level}")
            out[q] = level * (1.0 + g / 4.0) ** 4
        else:
            out[q] = spf_gdp_levels(g, level)
    return pd.Series(out, dtype=float)


def build_panel(
    vintage: Vintage,
    spec: ModelSpecKind,
    grid: pd.PeriodIndex,
    series_config: dict[str, SeriesSpec] | None = None,
    model_config: ModelConfig | None = None,
) -> Panel:
    """Assemble the normalized monthly panel for one vintage.

    Quarterly observations land in the last month of their quarter; the
    other grid positions stay missing. Per-series scales (first-difference
    standard deviations on this vintage's data) are stored for later
    de-normalization.
    """
    series_config = series_config or default_series_map()
    roles = observable_roles(spec)
    missing_roles = [r for r in roles if r not in series_config]
    if missing_roles:
        raise ConfigurationError(f"series config lacks roles: {missing_roles}")

    n = len(grid)
    values = np.full((n, len(roles)), np.nan)
    mask = np.zeros((n, len(roles)), dtype=bool)
    scales = np.ones(len(roles))
    month_pos = {p: i for i, p in enumerate(grid)}

    gdp_native = None
    if "gdp" in series_config:
        gdp_cfg = series_config["gdp"]
        gdp_native = _to_period_series(
            vintage.get(gdp_cfg.id), gdp_cfg.frequency
        )

    for r, role in enumerate(roles):
        cfg = series_config[role]
        obs = vintage.get(cfg.id)
        native = _to_period_series(obs, cfg.frequency)

        if role == "spf_gdp":
            if gdp_native is None:
                raise ConfigurationError("spf_gdp requires a gdp series config")
            native = _spf_expected_levels(native, gdp_native, cfg)
        elif cfg.transform == "yoy_from_index" and not native.empty:
            native = cpi_yoy(pd.Series(native.to_numpy(), index=native.index))

        if native.empty:
            continue
        try:
            scale = first_difference_scale(native)
        except ValidationError as err:
            raise ValidationError(f"{role}: {err}") from None
        scales[r] = scale

        for period, value in native.items():
            month = (
                period.asfreq("M", how="end") if period.freqstr.startswith("Q") else period
            )
            pos = month_pos.get(month)
            if pos is None:
                continue
            values[pos, r] = float(value) / scale
            mask[pos, r] = True

    return Panel(
        values=values,
        mask=mask,
        start=grid[0],
        series=roles,
        scales=scales,
    )


def check_information_discipline(panel: Panel, vintage_date: date) -> None:
    """Raise if the panel contains observations from after the vintage date.

    Reference months may coincide with the vintage month (mid-month
    surveys) but never postdate it.
    """
    limit = pd.Period(vintage_date, freq="M")
    months = panel.months
    observed_rows = np.flatnonzero(panel.mask.any(axis=1))
    if observed_rows.size and months[observed_rows[-1]] > limit:
        bad = months[observed_rows[-1]]
        raise ValidationError(
            f"panel contains observations for {bad}, after the vintage date "
            f"{vintage_date}"
        )
