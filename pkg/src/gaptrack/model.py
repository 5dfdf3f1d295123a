"""Nine-variable trend-cycle measurement and transition system.

Observable rows, in fixed order (the tracking variant includes the first
row, the undisciplined variant starts at real GDP):

    cbo_cycle        = (1+L+L^2)(gap + idio_gdp)                       quarterly
    gdp              = (1+L+L^2)(gap + idio_gdp + trend_gdp)           quarterly
    spf_gdp          = sum_j g_j L^j gap + idio + 3 trend_gdp + bias   quarterly
    unemployment     = sum_j g_j L^j gap + idio + trend_u              monthly
    employment       = sum_j g_j L^j gap + idio + trend_e              monthly
    oil              = epc + idio + trend_oil                          monthly
    cpi              = sum_j g_j L^j gap + d epc + idio + trend_pi     monthly
    spf_inflation    = sum_j g_j L^j gap + d epc + idio + trend_pi     quarterly
    uom_inflation    = sum_j g_j L^j gap + d epc + idio + trend_pi + bias  monthly

Every stationary cycle (the common gap and energy-price cycles and all
idiosyncratic components) is a damped rotation pair with damping rho,
frequency lambda, and one innovation variance shared by the pair. Trends
are random walks; output potential and trend employment carry drifts.
Quarterly rows observe the sum of the three latent monthly values, which
the lag states make available to the measurement matrix.

The survey-output bias is a zero-variance diffuse state: the smoother
estimates the time-invariant constant rather than the sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import ModelConfig, ModelSpecKind
from .errors import ConfigurationError, DomainError
from .priors import (
    InverseGammaPrior,
    NormalPrior,
    ParameterSpec,
    UniformPrior,
)
from .statespace import SmoothedStates, SystemMatrices

# Measurement-row order; the undisciplined variant drops the first row.
ALL_ROLES = [
    "cbo_cycle",
    "gdp",
    "spf_gdp",
    "unemployment",
    "employment",
    "oil",
    "cpi",
    "spf_inflation",
    "uom_inflation",
]

# Rows with free lag-polynomial loadings on the common gap cycle.
GAP_POLY_ROLES = [
    "spf_gdp",
    "unemployment",
    "employment",
    "cpi",
    "spf_inflation",
    "uom_inflation",
]
N_GAP_LAGS = 4  # contemporaneous plus three lags

# Rows loading the common energy-price cycle with a free coefficient.
EPC_LOADING_ROLES = ["cpi", "spf_inflation", "uom_inflation"]

# Variables with an own stationary component (the gdp one is shared with
# the cbo_cycle row).
IDIO_ROLES = [
    "gdp",
    "spf_gdp",
    "unemployment",
    "employment",
    "oil",
    "cpi",
    "spf_inflation",
    "uom_inflation",
]

TRENDED = {
    "gdp": "trend_gdp",
    "unemployment": "trend_unemployment",
    "employment": "trend_employment",
    "oil": "trend_oil",
    "cpi": "trend_inflation",
    "spf_inflation": "trend_inflation",
    "uom_inflation": "trend_inflation",
}

TREND_VAR_NAMES = [
    "trend_var_gdp",
    "trend_var_unemployment",
    "trend_var_employment",
    "trend_var_oil",
    "trend_var_inflation",
    "bias_var_uom_inflation",
]


def observable_roles(spec: ModelSpecKind) -> list[str]:
    if spec == ModelSpecKind.TRACKING:
        return list(ALL_ROLES)
    return [r for r in ALL_ROLES if r != "cbo_cycle"]


def state_names() -> list[str]:
    names = [
        "cycle_gap",
        "cycle_gap_aux",
        "cycle_gap_lag1",
        "cycle_gap_lag2",
        "cycle_gap_lag3",
        "cycle_epc",
        "cycle_epc_aux",
        "idio_gdp",
        "idio_gdp_aux",
        "idio_gdp_lag1",
        "idio_gdp_lag2",
    ]
    for role in IDIO_ROLES[1:]:
        names += [f"idio_{role}", f"idio_{role}_aux"]
    names += [
        "trend_gdp",
        "trend_gdp_lag1",
        "trend_gdp_lag2",
        "trend_unemployment",
        "trend_employment",
        "trend_oil",
        "trend_inflation",
        "bias_uom_inflation",
        "bias_spf_gdp",
    ]
    return names


DIFFUSE_STATES = {
    "trend_gdp",
    "trend_gdp_lag1",
    "trend_gdp_lag2",
    "trend_unemployment",
    "trend_employment",
    "trend_oil",
    "trend_inflation",
    "bias_uom_inflation",
    "bias_spf_gdp",
}


def parameter_layout(
    spec: ModelSpecKind, config: ModelConfig | None = None
) -> list[ParameterSpec]:
    """Ordered parameter descriptors; identical across the two variants.

    Order: common-cycle parameters, gap lag-polynomial loadings,
    energy-cycle loadings, idiosyncratic-cycle parameters per variable,
    trend variances, drifts. Priors come from the configuration, with the
    package defaults below where unspecified.
    """
    # weakly informative on data normalized to unit first-difference
    # standard deviation, where loadings of a few and component variances
    # up to order one are typical
    config = config or ModelConfig()
    rho_prior = UniformPrior(0.0, 1.0)
    cycle_var_prior = InverseGammaPrior(shape=2.0, scale=0.2)
    trend_var_prior = InverseGammaPrior(shape=2.0, scale=0.05)
    loading_prior = NormalPrior(0.0, 5.0)
    drift_prior = NormalPrior(0.0, 0.5)

    def lam_prior(band):
        lo, hi = band.lambda_bounds
        return UniformPrior(lo, hi)

    specs: list[ParameterSpec] = []
    specs.append(ParameterSpec("cycle_rho_gap", rho_prior))
    specs.append(ParameterSpec("cycle_lambda_gap", lam_prior(config.gap_band)))
    specs.append(ParameterSpec("cycle_var_gap", cycle_var_prior))
    specs.append(ParameterSpec("cycle_rho_epc", rho_prior))
    specs.append(ParameterSpec("cycle_lambda_epc", lam_prior(config.epc_band)))
    specs.append(ParameterSpec("cycle_var_epc", cycle_var_prior))
    for role in GAP_POLY_ROLES:
        for j in range(N_GAP_LAGS):
            specs.append(ParameterSpec(f"gap_load_{role}_{j}", loading_prior))
    for role in EPC_LOADING_ROLES:
        specs.append(ParameterSpec(f"epc_load_{role}", loading_prior))
    for role in IDIO_ROLES:
        specs.append(ParameterSpec(f"idio_rho_{role}", rho_prior))
        specs.append(ParameterSpec(f"idio_lambda_{role}", lam_prior(config.idio_band)))
        specs.append(ParameterSpec(f"idio_var_{role}", cycle_var_prior))
    for name in TREND_VAR_NAMES:
        specs.append(ParameterSpec(name, trend_var_prior))
    specs.append(ParameterSpec("drift_gdp", drift_prior))
    specs.append(ParameterSpec("drift_employment", drift_prior))

    out = []
    for sp in specs:
        override = config.prior_overrides.get(sp.name)
        out.append(ParameterSpec(sp.name, override) if override else sp)
    return out


def parameter_names(spec: ModelSpecKind, config: ModelConfig | None = None) -> list[str]:
    return [p.name for p in parameter_layout(spec, config)]


def params_from_dict(
    values: dict[str, float], spec: ModelSpecKind, config: ModelConfig | None = None
) -> np.ndarray:
    layout = parameter_layout(spec, config)
    missing = [p.name for p in layout if p.name not in values]
    if missing:
        raise ConfigurationError(f"missing parameter values: {missing[:5]}...")
    return np.array([float(values[p.name]) for p in layout])


def _get(values: np.ndarray, names: list[str], name: str) -> float:
    return float(values[names.index(name)])


def _check_cycle(name_rho, rho, name_lam, lam, name_var, var):
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"parameter {name_rho} = {rho} outside [0, 1)")
    if not (0.0 <= lam <= np.pi):
        raise DomainError(f"parameter {name_lam} = {lam} outside [0, pi]")
    if var < 0.0:
        raise DomainError(f"parameter {name_var} = {var} is negative")


def _rotation(rho: float, lam: float) -> np.ndarray:
    return rho * np.array(
        [[np.cos(lam), np.sin(lam)], [-np.sin(lam), np.cos(lam)]]
    )


def build_system(
    params: np.ndarray | dict,
    spec: ModelSpecKind,
    config: ModelConfig | None = None,
) -> SystemMatrices:
    """Assemble the state-space matrices from a parameter vector.

    Parameter values are validated against the structural bounds (damping
    in [0,1), frequency in [0,pi], variances nonnegative); violations name
    the parameter.
    """
    config = config or ModelConfig()
    layout = parameter_layout(spec, config)
    names = [p.name for p in layout]
    if isinstance(params, dict):
        vals = params_from_dict(params, spec, config)
    else:
        vals = np.asarray(params, dtype=float).ravel()
        if vals.shape[0] != len(names):
            raise ConfigurationError(
                f"parameter vector has length {vals.shape[0]}, expected {len(names)}"
            )

    snames = state_names()
    sidx = {n: j for j, n in enumerate(snames)}
    m = len(snames)
    roles = observable_roles(spec)
    p = len(roles)

    T = np.zeros((m, m))
    c = np.zeros(m)
    Z = np.zeros((p, m))

    shock_targets: list[tuple[str, float]] = []  # (state, variance)

    def add_cycle(base: str, rho: float, lam: float, var: float, n_lags: int):
        i, j = sidx[base], sidx[f"{base}_aux"]
        block = _rotation(rho, lam)
        T[i, i], T[i, j] = block[0, 0], block[0, 1]
        T[j, i], T[j, j] = block[1, 0], block[1, 1]
        shock_targets.append((base, var))
        shock_targets.append((f"{base}_aux", var))
        prev = base
        for lag in range(1, n_lags + 1):
            lname = f"{base}_lag{lag}"
            T[sidx[lname], sidx[prev]] = 1.0
            prev = lname

    rho_g = _get(vals, names, "cycle_rho_gap")
    lam_g = _get(vals, names, "cycle_lambda_gap")
    var_g = _get(vals, names, "cycle_var_gap")
    _check_cycle("cycle_rho_gap", rho_g, "cycle_lambda_gap", lam_g, "cycle_var_gap", var_g)
    add_cycle("cycle_gap", rho_g, lam_g, var_g, n_lags=3)

    rho_e = _get(vals, names, "cycle_rho_epc")
    lam_e = _get(vals, names, "cycle_lambda_epc")
    var_e = _get(vals, names, "cycle_var_epc")
    _check_cycle("cycle_rho_epc", rho_e, "cycle_lambda_epc", lam_e, "cycle_var_epc", var_e)
    add_cycle("cycle_epc", rho_e, lam_e, var_e, n_lags=0)

    for role in IDIO_ROLES:
        rho = _get(vals, names, f"idio_rho_{role}")
        lam = _get(vals, names, f"idio_lambda_{role}")
        var = _get(vals, names, f"idio_var_{role}")
        _check_cycle(
            f"idio_rho_{role}", rho, f"idio_lambda_{role}", lam, f"idio_var_{role}", var
        )
        add_cycle(f"idio_{role}", rho, lam, var, n_lags=2 if role == "gdp" else 0)

    # trends: random walks, potential output with two lag copies
    for trend, var_name in [
        ("trend_gdp", "trend_var_gdp"),
        ("trend_unemployment", "trend_var_unemployment"),
        ("trend_employment", "trend_var_employment"),
        ("trend_oil", "trend_var_oil"),
        ("trend_inflation", "trend_var_inflation"),
        ("bias_uom_inflation", "bias_var_uom_inflation"),
    ]:
        var = _get(vals, names, var_name)
        if var < 0.0:
            raise DomainError(f"parameter {var_name} = {var} is negative")
        T[sidx[trend], sidx[trend]] = 1.0
        shock_targets.append((trend, var))
    T[sidx["trend_gdp_lag1"], sidx["trend_gdp"]] = 1.0
    T[sidx["trend_gdp_lag2"], sidx["trend_gdp_lag1"]] = 1.0
    T[sidx["bias_spf_gdp"], sidx["bias_spf_gdp"]] = 1.0  # zero-variance level

    c[sidx["trend_gdp"]] = _get(vals, names, "drift_gdp")
    c[sidx["trend_employment"]] = _get(vals, names, "drift_employment")

    n_shock = len(shock_targets)
    R = np.zeros((m, n_shock))
    Q = np.zeros((n_shock, n_shock))
    for k, (state, var) in enumerate(shock_targets):
        R[sidx[state], k] = 1.0
        Q[k, k] = var

    quarterly_sum = ["", "_lag1", "_lag2"]
    for r, role in enumerate(roles):
        if role == "cbo_cycle":
            for suffix in quarterly_sum:
                Z[r, sidx[f"cycle_gap{suffix}"]] = 1.0
                Z[r, sidx[f"idio_gdp{suffix}"]] = 1.0
        elif role == "gdp":
            for suffix in quarterly_sum:
                Z[r, sidx[f"cycle_gap{suffix}"]] = 1.0
                Z[r, sidx[f"idio_gdp{suffix}"]] = 1.0
                Z[r, sidx[f"trend_gdp{suffix}"]] = 1.0
        else:
            if role in GAP_POLY_ROLES:
                lags = ["", "_lag1", "_lag2", "_lag3"]
                for j in range(N_GAP_LAGS):
                    Z[r, sidx[f"cycle_gap{lags[j]}"]] = _get(
                        vals, names, f"gap_load_{role}_{j}"
                    )
            if role == "oil":
                Z[r, sidx["cycle_epc"]] = 1.0
            elif role in EPC_LOADING_ROLES:
                Z[r, sidx["cycle_epc"]] = _get(vals, names, f"epc_load_{role}")
            Z[r, sidx[f"idio_{role}"]] = 1.0
            if role == "spf_gdp":
                Z[r, sidx["trend_gdp"]] = 3.0
                Z[r, sidx["bias_spf_gdp"]] = 1.0
            else:
                Z[r, sidx[TRENDED[role]]] = 1.0
            if role == "uom_inflation":
                Z[r, sidx["bias_uom_inflation"]] = 1.0

    flags = np.array([n in DIFFUSE_STATES for n in snames])
    H = config.h_jitter * np.eye(p) if config.h_jitter else None
    return SystemMatrices(
        Z=Z, T=T, c=c, R=R, Q=Q, H=H, diffuse_flags=flags, layout=sidx
    )


@dataclass
class ComponentSeries:
    """Per-variable decomposition of the smoothed fit, in natural units.

    Column order matches the observable rows of the chosen variant. The
    monthly gap level and potential output are in GDP units; the gap
    percentage is their ratio times 100.
    """

    series: list[str]
    business_cycle: np.ndarray
    epc: np.ndarray
    idiosyncratic: np.ndarray
    trend: np.ndarray
    bias: np.ndarray
    monthly_gap_level: np.ndarray
    potential: np.ndarray
    months: pd.PeriodIndex | None = None

    def fitted(self) -> np.ndarray:
        return self.business_cycle + self.epc + self.idiosyncratic + self.trend + self.bias


def extract_components(
    smoothed: SmoothedStates,
    params: np.ndarray | dict,
    spec: ModelSpecKind,
    scales: np.ndarray,
    config: ModelConfig | None = None,
    months: pd.PeriodIndex | None = None,
) -> ComponentSeries:
    """Split the smoothed fit of each observable into its loading groups."""
    config = config or ModelConfig()
    system = build_system(params, spec, config)
    roles = observable_roles(spec)
    scales = np.asarray(scales, dtype=float)
    if scales.shape[0] != len(roles):
        raise ConfigurationError("scales length does not match observable count")
    alpha = smoothed.mean
    snames = state_names()
    sidx = system.layout

    group_of = {}
    for name in snames:
        if name.startswith("cycle_gap"):
            group_of[name] = "bc"
        elif name.startswith("cycle_epc"):
            group_of[name] = "epc"
        elif name.startswith("idio_"):
            group_of[name] = "idio"
        elif name.startswith("trend_"):
            group_of[name] = "trend"
        else:
            group_of[name] = "bias"

    n = alpha.shape[0]
    parts = {g: np.zeros((n, len(roles))) for g in ("bc", "epc", "idio", "trend", "bias")}
    for r in range(len(roles)):
        for name in snames:
            w = system.Z[r, sidx[name]]
            if w != 0.0:
                parts[group_of[name]][:, r] += w * alpha[:, sidx[name]]
    for g in parts:
        parts[g] *= scales

    gdp_scale = scales[roles.index("gdp")]
    gap_level = (alpha[:, sidx["cycle_gap"]] + alpha[:, sidx["idio_gdp"]]) * gdp_scale
    potential = alpha[:, sidx["trend_gdp"]] * gdp_scale

    return ComponentSeries(
        series=roles,
        business_cycle=parts["bc"],
        epc=parts["epc"],
        idiosyncratic=parts["idio"],
        trend=parts["trend"],
        bias=parts["bias"],
        monthly_gap_level=gap_level,
        potential=potential,
        months=months,
    )


def output_gap_pct(components: ComponentSeries) -> np.ndarray:
    """Monthly output gap as a percentage of potential output.

    The numerator is the sum of the common business-cycle component and
    the output-specific stationary component; potential output must be
    strictly positive.
    """
    potential = components.potential
    bad = np.flatnonzero(potential <= 0.0)
    if bad.size:
        t = int(bad[0])
        when = str(components.months[t]) if components.months is not None else f"index {t}"
        raise DomainError(f"potential output is nonpositive at {when}")
    return 100.0 * components.monthly_gap_level / potential
