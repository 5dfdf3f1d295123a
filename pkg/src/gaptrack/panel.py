"""Monthly observation panels with missingness masks and per-series scales.

A panel holds every model variable on a uniform monthly grid. Quarterly
series occupy the last month of each quarter and are missing in the other
two months; the state-space engine skips missing entries, so no
interpolation ever happens on the data side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError


@dataclass
class Panel:
    """Multivariate monthly observations in measurement-row order.

    values : (n_months, n_series) float array, normalized units; entries at
        unobserved positions are NaN.
    mask : same shape, True where observed.
    start : first month of the grid.
    series : series role names, one per column, in measurement-row order.
    scales : per-series normalization divisors (natural units = normalized
        values times scale).
    """

    values: np.ndarray
    mask: np.ndarray
    start: pd.Period
    series: list[str] = field(default_factory=list)
    scales: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2:
            raise ValidationError("panel values must be 2-D (months x series)")
        if self.mask.shape != self.values.shape:
            raise ValidationError("panel mask shape does not match values")
        if not isinstance(self.start, pd.Period):
            self.start = pd.Period(self.start, freq="M")
        if not self.series:
            self.series = [f"series_{j}" for j in range(self.values.shape[1])]
        if len(self.series) != self.values.shape[1]:
            raise ValidationError("series names do not match panel width")
        if self.scales is None:
            self.scales = np.ones(self.values.shape[1])
        self.scales = np.asarray(self.scales, dtype=float)
        if np.any(self.scales <= 0):
            raise ValidationError("panel scales must be strictly positive")

    @property
    def n_months(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    @property
    def months(self) -> pd.PeriodIndex:
        return pd.period_range(self.start, periods=self.n_months, freq="M")

    def masked_values(self) -> np.ndarray:
        """Values with unobserved entries replaced by 0 (for kernel input).

        Observed entries pass through untouched, so non-finite data is
        caught by the filter at the offending time index rather than
        silently clamped.
        """
        return np.where(self.mask, self.values, 0.0)

    def denormalize(self) -> np.ndarray:
        """Observed values in natural units (NaN where missing)."""
        return self.values * self.scales

    def column(self, name: str) -> int:
        try:
            return self.series.index(name)
        except ValueError:
            raise ValidationError(f"panel has no series {name!r}") from None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.months, columns=self.series)


def first_difference_scale(obs: pd.Series) -> float:
    """Sample standard deviation of first differences over consecutive pairs.

    ``obs`` is indexed by Period at the series' native frequency; pairs with
    an index gap are excluded. Series too short to form two differences get
    scale 1.0; a zero standard deviation is a validation error because the
    series cannot be normalized.
    """
    if len(obs) < 3:
        return 1.0
    idx = obs.index
    vals = obs.to_numpy(dtype=float)
    steps = np.asarray((idx[1:] - idx[:-1]).map(lambda off: off.n))
    diffs = (vals[1:] - vals[:-1])[steps == 1]
    if len(diffs) < 2:
        return 1.0
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        raise ValidationError(
            "series has zero first-difference standard deviation; cannot normalize"
        )
    return sd
