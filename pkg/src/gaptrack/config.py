"""Configuration schema: model setup, data mapping, sampler and backtest runs.

Everything is a plain dataclass with defaults that reproduce the documented
setup; a YAML file overrides selectively. Prior hyperparameters for the
model parameters are deliberately configuration, not constants: the source
methodology does not publish them, so defaults here are package choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .priors import InverseGammaPrior, NormalPrior, Prior, UniformPrior


class ModelSpecKind(str, Enum):
    """Which measurement system to build.

    The tracking variant observes the official output-gap series as an
    extra quarterly row; the undisciplined variant omits that row. States
    and parameters are identical.
    """

    UNDISCIPLINED = "undisciplined"
    TRACKING = "tracking"


@dataclass(frozen=True)
class CycleBand:
    """Admissible cycle periodicity in months; maps to frequency bounds."""

    min_period: float
    max_period: float

    def __post_init__(self):
        if not (2.0 <= self.min_period < self.max_period):
            raise ConfigurationError(
                "cycle band needs 2 <= min_period < max_period (months)"
            )

    @property
    def lambda_bounds(self) -> tuple[float, float]:
        return (2.0 * math.pi / self.max_period, 2.0 * math.pi / self.min_period)


@dataclass
class ModelConfig:
    spec: ModelSpecKind = ModelSpecKind.UNDISCIPLINED
    gap_band: CycleBand = field(default_factory=lambda: CycleBand(24.0, 120.0))
    epc_band: CycleBand = field(default_factory=lambda: CycleBand(12.0, 96.0))
    idio_band: CycleBand = field(default_factory=lambda: CycleBand(2.5, 120.0))
    h_jitter: float = 0.0
    prior_overrides: dict[str, Prior] = field(default_factory=dict)


@dataclass
class SeriesSpec:
    """Maps one model role to a data series."""

    id: str
    frequency: str  # "M" or "Q"
    transform: str = "none"  # or "yoy_from_index"
    growth_units: str = "fraction"  # for survey growth expectations: or "percent"
    compounding: str = "simple"  # or "compound4"

    def __post_init__(self):
        if self.frequency not in ("M", "Q"):
            raise ConfigurationError(f"frequency must be M or Q, got {self.frequency}")
        if self.transform not in ("none", "yoy_from_index"):
            raise ConfigurationError(f"unknown transform {self.transform!r}")
        if self.growth_units not in ("fraction", "percent"):
            raise ConfigurationError(f"unknown growth units {self.growth_units!r}")
        if self.compounding not in ("simple", "compound4"):
            raise ConfigurationError(f"unknown compounding {self.compounding!r}")


def default_series_map() -> dict[str, SeriesSpec]:
    return {
        "cbo_cycle": SeriesSpec(id="CBO_CYCLE", frequency="Q"),
        "gdp": SeriesSpec(id="GDP", frequency="Q"),
        "spf_gdp": SeriesSpec(id="SPF_GDP_GROWTH", frequency="Q"),
        "unemployment": SeriesSpec(id="UNEMPLOYMENT", frequency="M"),
        "employment": SeriesSpec(id="EMPLOYMENT", frequency="M"),
        "oil": SeriesSpec(id="OIL", frequency="M"),
        "cpi": SeriesSpec(id="CPI_YOY", frequency="M"),
        "spf_inflation": SeriesSpec(id="SPF_INFLATION", frequency="Q"),
        "uom_inflation": SeriesSpec(id="UOM_INFLATION", frequency="M"),
    }


@dataclass
class DataConfig:
    series: dict[str, SeriesSpec] = field(default_factory=default_series_map)
    vintage_dir: Path = Path("data/vintages")
    calendar: Path = Path("data/calendar.csv")


@dataclass
class SamplerConfig:
    """Adaptive Metropolis-within-Gibbs run settings.

    accept_window = 0 adapts on the previous sweep's accept/reject outcome;
    W > 0 uses the acceptance rate over the last W sweeps instead.
    """

    n_iter: int = 10000
    burn_in: int = 5000
    adapt_start: int = 10
    target_accept: float = 0.44
    seed: int = 0
    state_draws_enabled: bool = True
    state_draw_thin: int = 1
    accept_window: int = 0
    init_search: int = 0

    def __post_init__(self):
        if not self.burn_in < self.n_iter:
            raise ConfigurationError("burn_in must be smaller than n_iter")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError("target_accept must lie in (0, 1)")
        if self.state_draw_thin < 1:
            raise ConfigurationError("state_draw_thin must be at least 1")


@dataclass
class BacktestConfig:
    """Real-time evaluation window and forecasting rules.

    family selects the model set: "full" runs the configured nine-variable
    variants; "reduced" runs the small synthetic benchmark (one variant,
    labelled "reduced"), which keeps end-to-end runs tractable in tests.
    """

    start: date = date(2005, 1, 1)
    end: date = date(2020, 9, 30)
    presample_years: int = 20
    horizons: int = 36
    truth: str = "final"  # or "first_release"
    truth_vintage: date | None = None
    specs: list[ModelSpecKind] = field(
        default_factory=lambda: [ModelSpecKind.UNDISCIPLINED, ModelSpecKind.TRACKING]
    )
    family: str = "full"
    n_predictive_draws: int = 10
    skip_failed_estimations: bool = False
    revision_cutoffs: list[date] = field(default_factory=list)
    output_dir: Path = Path("backtest_out")

    def __post_init__(self):
        if isinstance(self.start, str):
            self.start = date.fromisoformat(self.start)
        if isinstance(self.end, str):
            self.end = date.fromisoformat(self.end)
        if self.start >= self.end:
            raise ConfigurationError("backtest start must predate end")
        if self.horizons < 1:
            raise ConfigurationError("horizons must be nonempty")
        if self.truth not in ("final", "first_release"):
            raise ConfigurationError("truth must be 'final' or 'first_release'")
        if self.family not in ("full", "reduced"):
            raise ConfigurationError("family must be 'full' or 'reduced'")


@dataclass
class SimulateSettings:
    months: int = 360
    seed: int = 1234
    n_vintages: int = 24
    revision_sd: float = 0.0
    revision_months: int = 6
    output_dir: Path = Path("synthetic")
    kind: str = "reduced"  # or "full"


@dataclass
class AppConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)


def _parse_prior(doc: dict) -> Prior:
    family = doc.get("family")
    if family == "normal":
        return NormalPrior(mean=float(doc["mean"]), sd=float(doc["sd"]))
    if family == "inverse_gamma":
        return InverseGammaPrior(
            shape=float(doc["shape"]),
            scale=float(doc["scale"]),
            lower=float(doc.get("lower", 0.0)),
        )
    if family == "uniform":
        return UniformPrior(lower=float(doc["lower"]), upper=float(doc["upper"]))
    raise ConfigurationError(f"unknown prior family {family!r}")


def _parse_band(doc: dict) -> CycleBand:
    return CycleBand(
        min_period=float(doc["min_period"]), max_period=float(doc["max_period"])
    )


def load_config(path) -> AppConfig:
    """Read a YAML configuration; unspecified sections keep their defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    return config_from_dict(doc, base_dir=Path(path).parent)


def config_from_dict(doc: dict, base_dir: Path | None = None) -> AppConfig:
    cfg = AppConfig()

    mdoc = doc.get("model", {}) or {}
    model = cfg.model
    if "spec" in mdoc:
        model.spec = ModelSpecKind(mdoc["spec"])
    bands = mdoc.get("bands", {}) or {}
    if "gap" in bands:
        model.gap_band = _parse_band(bands["gap"])
    if "epc" in bands:
        model.epc_band = _parse_band(bands["epc"])
    if "idio" in bands:
        model.idio_band = _parse_band(bands["idio"])
    if "h_jitter" in mdoc:
        model.h_jitter = float(mdoc["h_jitter"])
    for name, pdoc in (mdoc.get("priors", {}) or {}).items():
        model.prior_overrides[name] = _parse_prior(pdoc)

    ddoc = doc.get("data", {}) or {}
    if "series" in ddoc:
        series = {}
        for role, sdoc in ddoc["series"].items():
            series[role] = SeriesSpec(
                id=str(sdoc["id"]),
                frequency=str(sdoc["frequency"]),
                transform=str(sdoc.get("transform", "none")),
                growth_units=str(sdoc.get("growth_units", "fraction")),
                compounding=str(sdoc.get("compounding", "simple")),
            )
        cfg.data.series = series
    for key in ("vintage_dir", "calendar"):
        if key in ddoc:
            p = Path(ddoc[key])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            setattr(cfg.data, key, p)

    sdoc = doc.get("sampler", {}) or {}
    for key in (
        "n_iter",
        "burn_in",
        "adapt_start",
        "seed",
        "state_draw_thin",
        "accept_window",
        "init_search",
    ):
        if key in sdoc:
            setattr(cfg.sampler, key, int(sdoc[key]))
    if "target_accept" in sdoc:
        cfg.sampler.target_accept = float(sdoc["target_accept"])
    if "state_draws_enabled" in sdoc:
        cfg.sampler.state_draws_enabled = bool(sdoc["state_draws_enabled"])

    bdoc = doc.get("backtest", {}) or {}
    bt = cfg.backtest
    if "start" in bdoc:
        bt.start = date.fromisoformat(str(bdoc["start"]))
    if "end" in bdoc:
        bt.end = date.fromisoformat(str(bdoc["end"]))
    for key in ("presample_years", "horizons", "n_predictive_draws"):
        if key in bdoc:
            setattr(bt, key, int(bdoc[key]))
    if "truth" in bdoc:
        bt.truth = str(bdoc["truth"])
    if "truth_vintage" in bdoc and bdoc["truth_vintage"]:
        bt.truth_vintage = date.fromisoformat(str(bdoc["truth_vintage"]))
    if "family" in bdoc:
        bt.family = str(bdoc["family"])
        if bt.family not in ("full", "reduced"):
            raise ConfigurationError("family must be 'full' or 'reduced'")
    if "skip_failed_estimations" in bdoc:
        bt.skip_failed_estimations = bool(bdoc["skip_failed_estimations"])
    if "revision_cutoffs" in bdoc:
        bt.revision_cutoffs = [
            date.fromisoformat(str(c)) for c in bdoc["revision_cutoffs"]
        ]
    if "specs" in bdoc:
        bt.specs = [ModelSpecKind(s) for s in bdoc["specs"]]
    if "output_dir" in bdoc:
        p = Path(bdoc["output_dir"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        bt.output_dir = p
    if bt.start >= bt.end:
        raise ConfigurationError("backtest start must predate end")

    simdoc = doc.get("simulate", {}) or {}
    sim = cfg.simulate
    for key in ("months", "seed", "n_vintages", "revision_months"):
        if key in simdoc:
            setattr(sim, key, int(simdoc[key]))
    if "revision_sd" in simdoc:
        sim.revision_sd = float(simdoc["revision_sd"])
    if "kind" in simdoc:
        sim.kind = str(simdoc["kind"])
    if "output_dir" in simdoc:
        p = Path(simdoc["output_dir"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        sim.output_dir = p

    return cfg


def fast_sampler(settings: SamplerConfig) -> SamplerConfig:
    """Desk-scale override: 2000 sweeps, 1000 burn-in."""
    return replace(settings, n_iter=2000, burn_in=1000)
