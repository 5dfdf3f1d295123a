"""General linear Gaussian state-space engine.

Measurement:   y_t = Z alpha_t + eps_t,        eps_t ~ N(0, H), H diagonal
Transition:    alpha_{t+1} = T alpha_t + c + R eta_t,  eta_t ~ N(0, Q), Q diagonal

Nonstationary states are initialized with an exact infinity-part covariance
(identity on the flagged states); stationary states start at their
unconditional moments, obtained from the discrete Lyapunov equation on the
stationary transition sub-block. Observations are filtered one scalar
element at a time, so missing entries simply drop out.

All operations are pure functions of their inputs and safe to call from
multiple threads; random draws take an explicit seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigurationError, NumericalError
from .panel import Panel

# Smoothed covariance diagonals this close below zero are clipped to zero.
COV_CLIP_TOL = 1e-10


@dataclass(frozen=True)
class SystemMatrices:
    """Time-invariant system matrices plus the state layout.

    Z : (n_obs, n_state) measurement loadings.
    T : (n_state, n_state) transition matrix.
    c : (n_state,) transition constants (drifts live here).
    R : (n_state, n_shock) innovation selection.
    Q : (n_shock, n_shock) diagonal innovation covariance.
    H : (n_obs, n_obs) diagonal measurement noise covariance (default zero).
    diffuse_flags : per-state booleans marking nonstationary states.
    layout : state name -> index bijection.
    """

    Z: np.ndarray
    T: np.ndarray
    c: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    H: np.ndarray | None = None
    diffuse_flags: np.ndarray | None = None
    layout: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        conv = lambda x: np.ascontiguousarray(np.asarray(x, dtype=float))
        object.__setattr__(self, "Z", np.atleast_2d(conv(self.Z)))
        object.__setattr__(self, "T", np.atleast_2d(conv(self.T)))
        object.__setattr__(self, "c", conv(self.c).ravel())
        object.__setattr__(self, "R", np.atleast_2d(conv(self.R)))
        object.__setattr__(self, "Q", np.atleast_2d(conv(self.Q)))
        H = np.zeros((self.Z.shape[0], self.Z.shape[0])) if self.H is None else np.atleast_2d(conv(self.H))
        object.__setattr__(self, "H", H)
        flags = (
            np.zeros(self.T.shape[0], dtype=bool)
            if self.diffuse_flags is None
            else np.asarray(self.diffuse_flags, dtype=bool).ravel()
        )
        object.__setattr__(self, "diffuse_flags", flags)
        if not self.layout:
            object.__setattr__(
                self, "layout", {f"state_{j}": j for j in range(self.T.shape[0])}
            )
        self.validate()

    @property
    def n_state(self) -> int:
        return self.T.shape[0]

    @property
    def n_obs(self) -> int:
        return self.Z.shape[0]

    @property
    def n_shock(self) -> int:
        return self.R.shape[1]

    def validate(self) -> None:
        m, p, q = self.n_state, self.n_obs, self.n_shock
        if self.T.shape != (m, m):
            raise ConfigurationError("transition matrix T must be square")
        if self.Z.shape != (p, m):
            raise ConfigurationError(
                f"measurement matrix Z has shape {self.Z.shape}, expected ({p}, {m})"
            )
        if self.c.shape != (m,):
            raise ConfigurationError("constant vector c has wrong length")
        if self.R.shape != (m, q):
            raise ConfigurationError("selection matrix R has wrong shape")
        if self.Q.shape != (q, q):
            raise ConfigurationError("innovation covariance Q has wrong shape")
        if self.H.shape != (p, p):
            raise ConfigurationError("measurement covariance H has wrong shape")
        for name, mat in (("Q", self.Q), ("H", self.H)):
            off = mat - np.diag(np.diag(mat))
            if np.any(off != 0.0):
                raise ConfigurationError(
                    f"{name} must be diagonal (univariate treatment requirement)"
                )
            if np.any(np.diag(mat) < 0):
                raise ConfigurationError(f"{name} diagonal must be nonnegative")
        if self.diffuse_flags.shape != (m,):
            raise ConfigurationError("diffuse_flags has wrong length")
        if sorted(self.layout.values()) != list(range(m)):
            raise ConfigurationError("layout must be a bijection onto 0..n_state-1")
        stat = ~self.diffuse_flags
        if stat.any():
            if self.diffuse_flags.any() and np.any(
                self.T[np.ix_(stat, self.diffuse_flags)] != 0.0
            ):
                raise ConfigurationError(
                    "stationary states may not load on diffuse states in T"
                )
            Tss = self.T[np.ix_(stat, stat)]
            rho = np.max(np.abs(np.linalg.eigvals(Tss))) if Tss.size else 0.0
            if rho >= 1.0:
                raise ConfigurationError(
                    f"stationary sub-block has spectral radius {rho:.6f} >= 1"
                )

    def rqr(self) -> np.ndarray:
        return self.R @ self.Q @ self.R.T

    def initial_conditions(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Initial mean, finite covariance, and infinity-part covariance.

        The stationary sub-block gets its unconditional moments; diffuse
        states get zero mean, zero finite part, and unit infinity part.
        """
        m = self.n_state
        a1 = np.zeros(m)
        Pstar = np.zeros((m, m))
        Pinf = np.zeros((m, m))
        diff = self.diffuse_flags
        stat = ~diff
        if stat.any():
            idx = np.flatnonzero(stat)
            Tss = np.ascontiguousarray(self.T[np.ix_(idx, idx)])
            Qss = np.ascontiguousarray(self.rqr()[np.ix_(idx, idx)])
            Pstar[np.ix_(idx, idx)] = _kernels.lyapunov_doubling(Tss, Qss)
            css = self.c[idx]
            if np.any(css != 0.0):
                a1[idx] = np.linalg.solve(np.eye(len(idx)) - Tss, css)
        if diff.any():
            idx = np.flatnonzero(diff)
            Pinf[idx, idx] = 1.0
        return a1, Pstar, Pinf

    def with_jitter(self, eps: float = 1e-8) -> "SystemMatrices":
        """Copy with eps added to the measurement noise diagonal."""
        return replace(self, H=self.H + eps * np.eye(self.n_obs))

    def state_index(self, name: str) -> int:
        return self.layout[name]

    def to_json_dict(self) -> dict:
        """Row-major debug representation for inspection."""
        return {
            "n_state": self.n_state,
            "n_obs": self.n_obs,
            "n_shock": self.n_shock,
            "Z": self.Z.tolist(),
            "T": self.T.tolist(),
            "c": self.c.tolist(),
            "R": self.R.tolist(),
            "Q": self.Q.tolist(),
            "H": self.H.tolist(),
            "diffuse_flags": self.diffuse_flags.astype(int).tolist(),
            "layout": dict(self.layout),
        }

    def dump_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


@dataclass
class _StepRecords:
    """Per-univariate-step filter quantities consumed by the smoother."""

    n_steps: int
    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    Fs: np.ndarray
    Fi: np.ndarray
    Ks: np.ndarray
    Ki: np.ndarray
    phase: np.ndarray
    branch: np.ndarray


@dataclass
class FilterOutput:
    """Forward-pass results.

    loglik : log density of the observed data (diffuse-likelihood
        convention: infinity-part steps contribute -(log 2 pi + log Finf)/2).
    d : number of univariate observation steps inside the diffuse phase.
    diffuse_complete : whether the infinity part collapsed to exactly zero.
    filtered_* / predicted_* : per-time moments; *_cov holds the finite
        covariance part, *_cov_inf the infinity part (zero after step d).
    """

    loglik: float
    d: int
    diffuse_complete: bool
    filtered_mean: np.ndarray
    filtered_cov: np.ndarray
    predicted_mean: np.ndarray
    predicted_cov: np.ndarray
    filtered_cov_inf: np.ndarray
    predicted_cov_inf: np.ndarray
    _steps: _StepRecords | None = None


@dataclass
class SmoothedStates:
    """Fixed-interval smoothed moments, plus sampled trajectories if drawn."""

    mean: np.ndarray
    cov: np.ndarray
    draws: np.ndarray | None = None


def _check_panel(model: SystemMatrices, panel: Panel) -> None:
    if panel.n_series != model.n_obs:
        raise ConfigurationError(
            f"panel has {panel.n_series} series, model expects {model.n_obs}"
        )


def _run_filter(model: SystemMatrices, panel: Panel, store: bool):
    _check_panel(model, panel)
    y = panel.masked_values()
    mask = np.ascontiguousarray(panel.mask)
    n, p = y.shape
    m = model.n_state
    a1, Pstar1, Pinf1 = model.initial_conditions()
    n_max = int(mask.sum())

    if store:
        a_pred = np.empty((n, m))
        Ps_pred = np.empty((n, m, m))
        Pi_pred = np.empty((n, m, m))
        a_filt = np.empty((n, m))
        Ps_filt = np.empty((n, m, m))
        Pi_filt = np.empty((n, m, m))
        step_t = np.empty(n_max, dtype=np.int64)
        step_i = np.empty(n_max, dtype=np.int64)
        step_v = np.empty(n_max)
        step_Fs = np.empty(n_max)
        step_Fi = np.empty(n_max)
        step_Ks = np.empty((n_max, m))
        step_Ki = np.empty((n_max, m))
        step_phase = np.empty(n_max, dtype=np.int8)
        step_branch = np.empty(n_max, dtype=np.int8)
    else:
        a_pred = np.empty((1, m))
        Ps_pred = np.empty((1, m, m))
        Pi_pred = np.empty((1, m, m))
        a_filt = np.empty((1, m))
        Ps_filt = np.empty((1, m, m))
        Pi_filt = np.empty((1, m, m))
        step_t = np.empty(1, dtype=np.int64)
        step_i = np.empty(1, dtype=np.int64)
        step_v = np.empty(1)
        step_Fs = np.empty(1)
        step_Fi = np.empty(1)
        step_Ks = np.empty((1, m))
        step_Ki = np.empty((1, m))
        step_phase = np.empty(1, dtype=np.int8)
        step_branch = np.empty(1, dtype=np.int8)

    status, err_t, loglik, d, done, n_steps = _kernels.filter_kernel(
        y,
        mask,
        model.Z,
        np.diag(model.H).copy(),
        model.T,
        model.c,
        model.rqr(),
        a1,
        Pstar1,
        Pinf1,
        store,
        a_pred,
        Ps_pred,
        Pi_pred,
        a_filt,
        Ps_filt,
        Pi_filt,
        step_t,
        step_i,
        step_v,
        step_Fs,
        step_Fi,
        step_Ks,
        step_Ki,
        step_phase,
        step_branch,
    )
    if status != 0:
        raise NumericalError(
            "non-finite likelihood contribution", time_index=int(err_t)
        )
    if not store:
        return float(loglik), int(d), bool(done), None

    steps = _StepRecords(
        n_steps=int(n_steps),
        t=step_t,
        i=step_i,
        v=step_v,
        Fs=step_Fs,
        Fi=step_Fi,
        Ks=step_Ks,
        Ki=step_Ki,
        phase=step_phase,
        branch=step_branch,
    )
    out = FilterOutput(
        loglik=float(loglik),
        d=int(d),
        diffuse_complete=bool(done),
        filtered_mean=a_filt,
        filtered_cov=Ps_filt,
        predicted_mean=a_pred,
        predicted_cov=Ps_pred,
        filtered_cov_inf=Pi_filt,
        predicted_cov_inf=Pi_pred,
        _steps=steps,
    )
    return float(loglik), int(d), bool(done), out


def loglik(model: SystemMatrices, panel: Panel) -> float:
    """Exact-diffuse log-likelihood without storing moments."""
    value, _, _, _ = _run_filter(model, panel, store=False)
    return value


def filter_diffuse(model: SystemMatrices, panel: Panel) -> FilterOutput:
    """Run the exact-diffuse univariate Kalman filter over the panel."""
    _, _, _, out = _run_filter(model, panel, store=True)
    return out


def _run_smoother(model: SystemMatrices, panel: Panel, want_cov: bool):
    filt = filter_diffuse(model, panel)
    st = filt._steps
    n, m = filt.predicted_mean.shape
    out_mean = np.empty((n, m))
    out_cov = np.empty((n, m, m)) if want_cov else np.empty((1, 1, 1))
    _kernels.smoother_kernel(
        model.Z,
        model.T,
        filt.predicted_mean,
        filt.predicted_cov,
        filt.predicted_cov_inf,
        st.n_steps,
        st.t,
        st.i,
        st.v,
        st.Fs,
        st.Fi,
        st.Ks,
        st.Ki,
        st.phase,
        st.branch,
        want_cov,
        out_mean,
        out_cov,
    )
    return out_mean, out_cov


def smooth(model: SystemMatrices, panel: Panel) -> SmoothedStates:
    """Fixed-interval smoothed state moments consistent with the filter."""
    out_mean, out_cov = _run_smoother(model, panel, want_cov=True)
    # Tiny negative variances from roundoff are clipped to zero.
    diag = np.einsum("tii->ti", out_cov)
    tiny = (diag < 0.0) & (diag > -COV_CLIP_TOL)
    diag[tiny] = 0.0
    return SmoothedStates(mean=out_mean, cov=out_cov)


def smoothed_mean(model: SystemMatrices, panel: Panel) -> np.ndarray:
    """Smoothed state means only; skips all covariance recursions."""
    out_mean, _ = _run_smoother(model, panel, want_cov=False)
    return out_mean


def _draw_initial_state(
    model: SystemMatrices, Pstar1: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Zero-mean draw of the proper part of the initial state.

    Diffuse states are pinned at zero: the smoother reproduces any shift in
    a diffuse direction exactly, so the recentred draw is invariant to the
    value used here.
    """
    m = model.n_state
    alpha1 = np.zeros(m)
    stat = np.flatnonzero(~model.diffuse_flags)
    if stat.size:
        block = Pstar1[np.ix_(stat, stat)]
        w, V = np.linalg.eigh(block)
        L = V * np.sqrt(np.clip(w, 0.0, None))
        alpha1[stat] = L @ rng.standard_normal(stat.size)
    return alpha1


def simulate_states(model: SystemMatrices, panel: Panel, seed: int) -> np.ndarray:
    """One exact draw from the states' distribution given the observations.

    Recentred simulation-smoother draw: simulate an unconditional zero-mean
    path (constants removed, diffuse states at zero), smooth the simulated
    observations under the zero-constant model, and add the difference to
    the smoothed mean of the actual data. Constants and drifts therefore
    enter only through the data smoother, which keeps the draw unbiased.
    """
    _check_panel(model, panel)
    rng = np.random.default_rng(seed)
    n = panel.n_months
    m = model.n_state

    data_mean = smoothed_mean(model, panel)

    _, Pstar1, _ = model.initial_conditions()
    alpha1 = _draw_initial_state(model, Pstar1, rng)
    q_sd = np.sqrt(np.diag(model.Q))
    shocks = rng.standard_normal((n - 1, model.n_shock)) * q_sd
    alpha_plus = _kernels.state_recursion(
        model.T, np.zeros(m), model.R, alpha1, shocks
    )

    y_plus = alpha_plus @ model.Z.T
    h_sd = np.sqrt(np.diag(model.H))
    if np.any(h_sd > 0.0):
        y_plus = y_plus + rng.standard_normal((n, model.n_obs)) * h_sd

    zero_c = replace(model, c=np.zeros(m))
    panel_plus = Panel(
        values=np.where(panel.mask, y_plus, np.nan),
        mask=panel.mask.copy(),
        start=panel.start,
        series=list(panel.series),
        scales=panel.scales.copy(),
    )
    sim_mean = smoothed_mean(zero_c, panel_plus)

    return data_mean + alpha_plus - sim_mean


@dataclass
class Forecast:
    """Per-horizon forecast moments for states and observables."""

    state_mean: np.ndarray  # (horizon, n_state)
    state_cov: np.ndarray  # (horizon, n_state, n_state)
    obs_mean: np.ndarray  # (horizon, n_obs)
    obs_cov: np.ndarray  # (horizon, n_obs, n_obs)


def forecast(
    model: SystemMatrices,
    terminal_mean: np.ndarray,
    terminal_cov: np.ndarray,
    horizon: int,
) -> Forecast:
    """Iterate the transition for ``horizon`` months past the terminal state."""
    if horizon < 1:
        raise ConfigurationError("forecast horizon must be at least 1")
    mean = np.asarray(terminal_mean, dtype=float).copy()
    cov = np.asarray(terminal_cov, dtype=float).copy()
    if mean.shape != (model.n_state,) or cov.shape != (model.n_state, model.n_state):
        raise ConfigurationError("terminal moments have wrong dimensions")
    rqr = model.rqr()
    state_mean = np.empty((horizon, model.n_state))
    state_cov = np.empty((horizon, model.n_state, model.n_state))
    obs_mean = np.empty((horizon, model.n_obs))
    obs_cov = np.empty((horizon, model.n_obs, model.n_obs))
    for h in range(horizon):
        mean = model.T @ mean + model.c
        cov = model.T @ cov @ model.T.T + rqr
        cov = 0.5 * (cov + cov.T)
        state_mean[h] = mean
        state_cov[h] = cov
        obs_mean[h] = model.Z @ mean
        obs_cov[h] = model.Z @ cov @ model.Z.T + model.H
    return Forecast(state_mean, state_cov, obs_mean, obs_cov)
