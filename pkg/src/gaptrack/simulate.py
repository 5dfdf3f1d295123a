"""Synthetic data generation: full and reduced model variants, plus
vintage/calendar writers for backtest experiments.

The reduced benchmark keeps the common gap and energy-price cycles, a
quarterly output series with trend, and three monthly series (unemployment,
oil, inflation), with contemporaneous loadings only. It is small enough to
re-estimate thousands of times in tests while still exercising mixed
frequencies, diffuse trends, and the full sampler stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from . import _kernels
from .config import ModelConfig, ModelSpecKind, SeriesSpec, SimulateSettings
from .errors import ConfigurationError
from .model import build_system, observable_roles, parameter_layout
from .panel import Panel
from .priors import (
    InverseGammaPrior,
    NormalPrior,
    ParameterSpec,
    UniformPrior,
)
from .statespace import SystemMatrices

REDUCED_ROLES = ["gdp", "unemployment", "oil", "cpi"]
REDUCED_QUARTERLY = {"gdp"}

# Trend variances keep every series' first-difference dispersion within an
# order of magnitude of its cycle contribution, so the loadings implied
# after normalization stay moderate.
REDUCED_TRUE_PARAMS = {
    "cycle_rho_gap": 0.95,
    "cycle_lambda_gap": 2.0 * np.pi / 60.0,
    "cycle_var_gap": 0.03,
    "cycle_rho_epc": 0.85,
    "cycle_lambda_epc": 2.0 * np.pi / 30.0,
    "cycle_var_epc": 0.25,
    "gap_load_unemployment": -0.35,
    "gap_load_cpi": 0.20,
    "epc_load_cpi": 0.40,
    "trend_var_gdp": 0.002,
    "trend_var_unemployment": 0.02,
    "trend_var_oil": 0.005,
    "trend_var_inflation": 0.0005,
    "drift_gdp": 0.10,
}

REDUCED_INITIAL_TRENDS = {
    "trend_gdp": 25.0,
    "trend_unemployment": 6.0,
    "trend_oil": 50.0,
    "trend_inflation": 2.5,
}

REDUCED_STATES = [
    "cycle_gap",
    "cycle_gap_aux",
    "cycle_gap_lag1",
    "cycle_gap_lag2",
    "cycle_epc",
    "cycle_epc_aux",
    "trend_gdp",
    "trend_gdp_lag1",
    "trend_gdp_lag2",
    "trend_unemployment",
    "trend_oil",
    "trend_inflation",
]


def reduced_parameter_layout(config: ModelConfig | None = None) -> list[ParameterSpec]:
    config = config or ModelConfig()
    lo_g, hi_g = config.gap_band.lambda_bounds
    lo_e, hi_e = config.epc_band.lambda_bounds
    defaults = [
        ParameterSpec("cycle_rho_gap", UniformPrior(0.0, 1.0)),
        ParameterSpec("cycle_lambda_gap", UniformPrior(lo_g, hi_g)),
        ParameterSpec("cycle_var_gap", InverseGammaPrior(2.0, 0.2)),
        ParameterSpec("cycle_rho_epc", UniformPrior(0.0, 1.0)),
        ParameterSpec("cycle_lambda_epc", UniformPrior(lo_e, hi_e)),
        ParameterSpec("cycle_var_epc", InverseGammaPrior(2.0, 0.2)),
        ParameterSpec("gap_load_unemployment", NormalPrior(0.0, 5.0)),
        ParameterSpec("gap_load_cpi", NormalPrior(0.0, 5.0)),
        ParameterSpec("epc_load_cpi", NormalPrior(0.0, 5.0)),
        ParameterSpec("trend_var_gdp", InverseGammaPrior(2.0, 0.05)),
        ParameterSpec("trend_var_unemployment", InverseGammaPrior(2.0, 0.05)),
        ParameterSpec("trend_var_oil", InverseGammaPrior(2.0, 0.05)),
        ParameterSpec("trend_var_inflation", InverseGammaPrior(2.0, 0.05)),
        ParameterSpec("drift_gdp", NormalPrior(0.0, 0.5)),
    ]
    out = []
    for sp in defaults:
        override = config.prior_overrides.get(sp.name)
        out.append(ParameterSpec(sp.name, override) if override else sp)
    return out


def build_reduced_system(params, config: ModelConfig | None = None) -> SystemMatrices:
    """Reduced measurement/transition system; same conventions as the full one."""
    layout = reduced_parameter_layout(config)
    names = [p.name for p in layout]
    if isinstance(params, dict):
        vals = np.array([float(params[n]) for n in names])
    else:
        vals = np.asarray(params, dtype=float).ravel()
        if vals.shape[0] != len(names):
            raise ConfigurationError(
                f"parameter vector has length {vals.shape[0]}, expected {len(names)}"
            )
    g = dict(zip(names, vals))

    snames = REDUCED_STATES
    sidx = {n: j for j, n in enumerate(snames)}
    m = len(snames)
    T = np.zeros((m, m))
    c = np.zeros(m)

    def rotation(rho, lam):
        return rho * np.array(
            [[np.cos(lam), np.sin(lam)], [-np.sin(lam), np.cos(lam)]]
        )

    blk = rotation(g["cycle_rho_gap"], g["cycle_lambda_gap"])
    T[0:2, 0:2] = blk
    T[sidx["cycle_gap_lag1"], sidx["cycle_gap"]] = 1.0
    T[sidx["cycle_gap_lag2"], sidx["cycle_gap_lag1"]] = 1.0
    T[4:6, 4:6] = rotation(g["cycle_rho_epc"], g["cycle_lambda_epc"])
    for trend in ("trend_gdp", "trend_unemployment", "trend_oil", "trend_inflation"):
        T[sidx[trend], sidx[trend]] = 1.0
    T[sidx["trend_gdp_lag1"], sidx["trend_gdp"]] = 1.0
    T[sidx["trend_gdp_lag2"], sidx["trend_gdp_lag1"]] = 1.0
    c[sidx["trend_gdp"]] = g["drift_gdp"]

    shocks = [
        ("cycle_gap", g["cycle_var_gap"]),
        ("cycle_gap_aux", g["cycle_var_gap"]),
        ("cycle_epc", g["cycle_var_epc"]),
        ("cycle_epc_aux", g["cycle_var_epc"]),
        ("trend_gdp", g["trend_var_gdp"]),
        ("trend_unemployment", g["trend_var_unemployment"]),
        ("trend_oil", g["trend_var_oil"]),
        ("trend_inflation", g["trend_var_inflation"]),
    ]
    R = np.zeros((m, len(shocks)))
    Q = np.zeros((len(shocks), len(shocks)))
    for k, (state, var) in enumerate(shocks):
        R[sidx[state], k] = 1.0
        Q[k, k] = var

    Z = np.zeros((4, m))
    for suffix in ("", "_lag1", "_lag2"):
        Z[0, sidx[f"cycle_gap{suffix}"]] = 1.0
        Z[0, sidx[f"trend_gdp{suffix}"]] = 1.0
    Z[1, sidx["cycle_gap"]] = g["gap_load_unemployment"]
    Z[1, sidx["trend_unemployment"]] = 1.0
    Z[2, sidx["cycle_epc"]] = 1.0
    Z[2, sidx["trend_oil"]] = 1.0
    Z[3, sidx["cycle_gap"]] = g["gap_load_cpi"]
    Z[3, sidx["cycle_epc"]] = g["epc_load_cpi"]
    Z[3, sidx["trend_inflation"]] = 1.0

    flags = np.array([n.startswith("trend_") for n in snames])
    return SystemMatrices(Z=Z, T=T, c=c, R=R, Q=Q, diffuse_flags=flags, layout=sidx)


def simulate_observations(
    system: SystemMatrices,
    n_months: int,
    rng: np.random.Generator,
    initial_levels: dict[str, float] | None = None,
    burn: int = 120,
):
    """Simulate states and noiseless signals from the system matrices.

    Stationary states start from their unconditional distribution (after a
    burn-in); diffuse states start at the given levels. Returns the state
    paths and the measurement signals Z alpha (H is zero in this model
    family, so these are the observations).
    """
    m = system.n_state
    q_sd = np.sqrt(np.diag(system.Q))
    alpha = np.zeros(m)
    inv = {v: k for k, v in system.layout.items()}
    for j in range(m):
        if system.diffuse_flags[j] and initial_levels:
            alpha[j] = initial_levels.get(inv[j], 0.0)
    # lag copies of diffuse levels start at the same value
    for j in range(m):
        name = inv[j]
        if system.diffuse_flags[j] and "_lag" in name and initial_levels:
            alpha[j] = initial_levels.get(name.split("_lag")[0], 0.0)

    stat = ~system.diffuse_flags
    for _ in range(burn):
        shock = system.R @ (rng.standard_normal(system.n_shock) * q_sd)
        new = system.T @ alpha + shock
        alpha[stat] = new[stat]

    shocks = rng.standard_normal((n_months - 1, system.n_shock)) * q_sd
    states = _kernels.state_recursion(system.T, system.c, system.R, alpha, shocks)
    signals = states @ system.Z.T
    return states, signals


@dataclass
class SyntheticDataset:
    """Simulated observations plus the latent truth behind them."""

    roles: list[str]
    quarterly: set[str]
    months: pd.PeriodIndex
    observations: pd.DataFrame  # natural units, NaN off-frequency
    states: np.ndarray
    state_index: dict[str, int]
    true_params: dict[str, float]
    gap_pct: pd.Series
    potential: pd.Series
    series_map: dict[str, SeriesSpec]


def quarterly_mask(months: pd.PeriodIndex) -> np.ndarray:
    return np.asarray([p.month in (3, 6, 9, 12) for p in months])


def generate_reduced_dataset(
    months: int = 360,
    seed: int = 1234,
    start: str = "1985-01",
    true_params: dict[str, float] | None = None,
) -> SyntheticDataset:
    params = dict(REDUCED_TRUE_PARAMS)
    if true_params:
        params.update(true_params)
    system = build_reduced_system(params)
    rng = np.random.default_rng(seed)
    states, signals = simulate_observations(
        system, months, rng, initial_levels=REDUCED_INITIAL_TRENDS
    )
    grid = pd.period_range(start, periods=months, freq="M")
    obs = pd.DataFrame(signals, index=grid, columns=REDUCED_ROLES)
    qmask = quarterly_mask(grid)
    for role in REDUCED_QUARTERLY:
        obs.loc[~qmask, role] = np.nan
    # the first two quarterly sums reach into presimulation months
    obs.iloc[:2, obs.columns.get_loc("gdp")] = np.nan

    sidx = system.layout
    gap = states[:, sidx["cycle_gap"]]
    potential = states[:, sidx["trend_gdp"]]
    gap_pct = pd.Series(100.0 * gap / potential, index=grid)

    series_map = {
        "gdp": SeriesSpec(id="SYN_GDP", frequency="Q"),
        "unemployment": SeriesSpec(id="SYN_UNEMP", frequency="M"),
        "oil": SeriesSpec(id="SYN_OIL", frequency="M"),
        "cpi": SeriesSpec(id="SYN_CPI", frequency="M"),
    }
    return SyntheticDataset(
        roles=list(REDUCED_ROLES),
        quarterly=set(REDUCED_QUARTERLY),
        months=grid,
        observations=obs,
        states=states,
        state_index=dict(sidx),
        true_params=params,
        gap_pct=gap_pct,
        potential=pd.Series(potential, index=grid),
        series_map=series_map,
    )


def full_model_true_params(spec: ModelSpecKind) -> dict[str, float]:
    """Plausible parameter values for simulating the nine-variable system."""
    rng_defaults = {
        "cycle_rho_gap": 0.94,
        "cycle_lambda_gap": 2.0 * np.pi / 72.0,
        "cycle_var_gap": 0.01,
        "cycle_rho_epc": 0.8,
        "cycle_lambda_epc": 2.0 * np.pi / 24.0,
        "cycle_var_epc": 0.2,
        "drift_gdp": 0.08,
        "drift_employment": 0.05,
        "trend_var_gdp": 0.002,
        "trend_var_unemployment": 0.001,
        "trend_var_employment": 0.001,
        "trend_var_oil": 0.004,
        "trend_var_inflation": 0.0005,
        "bias_var_uom_inflation": 0.0008,
    }
    loadings = {
        "spf_gdp": [0.5, 0.3, 0.2, 0.1],
        "unemployment": [-0.15, -0.1, -0.05, -0.02],
        "employment": [0.12, 0.08, 0.05, 0.02],
        "cpi": [0.08, 0.06, 0.04, 0.02],
        "spf_inflation": [0.05, 0.04, 0.02, 0.01],
        "uom_inflation": [0.05, 0.03, 0.02, 0.01],
    }
    out = dict(rng_defaults)
    for role, vals in loadings.items():
        for j, v in enumerate(vals):
            out[f"gap_load_{role}_{j}"] = v
    for role, v in {"cpi": 0.3, "spf_inflation": 0.15, "uom_inflation": 0.2}.items():
        out[f"epc_load_{role}"] = v
    for role in ("gdp", "spf_gdp", "unemployment", "employment", "oil", "cpi", "spf_inflation", "uom_inflation"):
        out[f"idio_rho_{role}"] = 0.5
        out[f"idio_lambda_{role}"] = 2.0 * np.pi / 12.0
        out[f"idio_var_{role}"] = 0.01
    return out


FULL_INITIAL_TRENDS = {
    "trend_gdp": 30.0,
    "trend_unemployment": 6.0,
    "trend_employment": 40.0,
    "trend_oil": 45.0,
    "trend_inflation": 2.5,
    "bias_uom_inflation": 0.7,
    "bias_spf_gdp": 1.5,
}


def generate_full_panel(
    spec: ModelSpecKind,
    months: int = 420,
    seed: int = 7,
    config: ModelConfig | None = None,
    true_params: dict[str, float] | None = None,
    start: str = "1985-01",
) -> tuple[Panel, np.ndarray, SystemMatrices]:
    """Simulate the nine-variable system straight into a normalized panel.

    Returns the panel (unit scales: values are already in model units), the
    simulated state paths, and the generating system.
    """
    params = full_model_true_params(spec)
    if true_params:
        params.update(true_params)
    system = build_system(params, spec, config)
    rng = np.random.default_rng(seed)
    states, signals = simulate_observations(
        system, months, rng, initial_levels=FULL_INITIAL_TRENDS
    )
    grid = pd.period_range(start, periods=months, freq="M")
    roles = observable_roles(spec)
    quarterly = {"cbo_cycle", "gdp", "spf_gdp", "spf_inflation"}
    mask = np.ones((months, len(roles)), dtype=bool)
    qm = quarterly_mask(grid)
    for r, role in enumerate(roles):
        if role in quarterly:
            mask[:, r] = qm
            # initial lag states are approximate for the first two months
            mask[:2, r] = False
    values = np.where(mask, signals, np.nan)
    panel = Panel(values=values, mask=mask, start=grid[0], series=roles)
    return panel, states, system


def write_vintage_csv(path: Path, series: dict[str, pd.Series], vintage_date: date) -> None:
    """Write one vintage file; reference dates are period end dates."""
    from .vintages import Vintage

    converted = {}
    for sid, obs in series.items():
        obs = obs.dropna()
        idx = pd.DatetimeIndex(
            [p.to_timestamp(how="end").normalize() for p in obs.index]
        )
        converted[sid] = pd.Series(obs.to_numpy(dtype=float), index=idx)
    Vintage(vintage_date=vintage_date, series=converted).save(path)


@dataclass
class SyntheticVintages:
    calendar_path: Path
    vintage_paths: list[Path]
    truth_path: Path
    dataset: SyntheticDataset
    series_config: dict[str, SeriesSpec] = field(default_factory=dict)


def write_synthetic_vintages(
    dataset: SyntheticDataset,
    outdir: Path,
    n_vintages: int,
    first_release: date,
    revision_sd: float = 0.0,
    revision_months: int = 6,
    publication_lag: int = 1,
    seed: int = 99,
) -> SyntheticVintages:
    """Monthly release calendar over the tail of a synthetic dataset.

    Release v (dated the first of its month) sees every observation whose
    reference month ends at least ``publication_lag`` months earlier. With
    ``revision_sd`` > 0, values younger than ``revision_months`` at release
    time carry noise that disappears once they age past the window, so
    early vintages get revised and the final vintage equals the truth.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    months = dataset.months
    obs = dataset.observations

    first = pd.Period(first_release, freq="M")
    releases = [first + k for k in range(n_vintages)]
    if releases[-1] - publication_lag > months[-1]:
        raise ConfigurationError("release calendar extends past the simulated sample")

    rev_noise = {
        role: pd.Series(
            rng.standard_normal(len(months)) * revision_sd, index=months
        )
        for role in dataset.roles
    }

    vintage_paths = []
    calendar_rows = []
    previous_counts = {role: -1 for role in dataset.roles}
    for rel in releases:
        vdate = rel.to_timestamp().date()
        cutoff = rel - publication_lag
        series = {}
        for role in dataset.roles:
            sid = dataset.series_map[role].id
            col = obs[role].dropna()
            avail = col[col.index <= cutoff]
            if revision_sd > 0 and len(avail):
                age = np.array([(rel - p).n for p in avail.index])
                noisy = avail + np.where(
                    age < revision_months, rev_noise[role][avail.index], 0.0
                )
                series[sid] = noisy
            else:
                series[sid] = avail
        fname = f"vintage_{vdate.isoformat()}.csv"
        path = outdir / fname
        write_vintage_csv(path, series, vdate)
        vintage_paths.append(path)
        for role in dataset.roles:
            count = int(obs[role].dropna()[obs[role].dropna().index <= cutoff].size)
            if count != previous_counts[role]:
                calendar_rows.append((vdate, dataset.series_map[role].id, fname))
                previous_counts[role] = count

    truth_path = outdir / "vintage_truth.csv"
    truth_date = (months[-1] + 1).to_timestamp().date()
    write_vintage_csv(
        truth_path,
        {dataset.series_map[r].id: obs[r].dropna() for r in dataset.roles},
        truth_date,
    )

    calendar_path = outdir / "calendar.csv"
    with open(calendar_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("release_date,series_id,vintage_file\n")
        for vdate, sid, fname in calendar_rows:
            fh.write(f"{vdate.isoformat()},{sid},{fname}\n")

    truth_components = pd.DataFrame(
        {"gap_pct": dataset.gap_pct, "potential": dataset.potential}
    )
    truth_components.to_csv(outdir / "true_components.csv", index_label="month")

    return SyntheticVintages(
        calendar_path=calendar_path,
        vintage_paths=vintage_paths,
        truth_path=truth_path,
        dataset=dataset,
        series_config=dict(dataset.series_map),
    )


def generate_full_dataset(
    spec: ModelSpecKind,
    months: int = 420,
    seed: int = 7,
    config: ModelConfig | None = None,
    true_params: dict[str, float] | None = None,
    start: str = "1985-01",
) -> SyntheticDataset:
    """Nine-variable synthetic dataset in vintage-storable form.

    Survey output expectations are stored as growth rates against the
    latest simulated output level, matching how real vintages arrive; the
    panel builder reconstructs the simulated level expectation exactly.
    """
    from .config import default_series_map

    panel, states, system = generate_full_panel(
        spec, months=months, seed=seed, config=config, true_params=true_params, start=start
    )
    roles = list(panel.series)
    obs = pd.DataFrame(panel.values, index=panel.months, columns=roles)

    if "spf_gdp" in roles:
        gdp_q = obs["gdp"].dropna()
        growth = {}
        for month, level in obs["spf_gdp"].dropna().items():
            anchors = gdp_q[gdp_q.index <= month]
            if anchors.empty:
                continue
            growth[month] = float(level) / float(anchors.iloc[-1]) - 1.0
        col = pd.Series(np.nan, index=obs.index)
        for month, g in growth.items():
            col[month] = g
        obs["spf_gdp"] = col

    sidx = system.layout
    gap = states[:, sidx["cycle_gap"]] + states[:, sidx["idio_gdp"]]
    potential = states[:, sidx["trend_gdp"]]
    quarterly = {r for r in roles if r in ("cbo_cycle", "gdp", "spf_gdp", "spf_inflation")}
    return SyntheticDataset(
        roles=roles,
        quarterly=quarterly,
        months=panel.months,
        observations=obs,
        states=states,
        state_index=dict(sidx),
        true_params=full_model_true_params(spec) | (true_params or {}),
        gap_pct=pd.Series(100.0 * gap / potential, index=panel.months),
        potential=pd.Series(potential, index=panel.months),
        series_map={r: default_series_map()[r] for r in roles},
    )


def run_simulate(settings: SimulateSettings, config: ModelConfig | None = None) -> SyntheticVintages:
    """Entry point behind the ``simulate`` CLI command."""
    if settings.kind == "reduced":
        dataset = generate_reduced_dataset(months=settings.months, seed=settings.seed)
    else:
        raise ConfigurationError(
            "only the reduced synthetic generator writes vintages; use kind: reduced"
        )
    first_release = (dataset.months[-1] - settings.n_vintages + 2).to_timestamp().date()
    return write_synthetic_vintages(
        dataset,
        settings.output_dir,
        n_vintages=settings.n_vintages,
        first_release=first_release,
        revision_sd=settings.revision_sd,
        revision_months=settings.revision_months,
        seed=settings.seed + 1,
    )
