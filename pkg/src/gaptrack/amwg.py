"""Adaptive Metropolis-within-Gibbs sampler.

One sweep visits every parameter once in a fresh random order. Each visit
first rescales that parameter's Gaussian proposal from last sweep's
acceptance outcome (toward the 0.44 single-component target), then makes a
Metropolis step on the unbounded scale, where the kernel is

    log p(data | Theta) + log p(Theta) + log |d Theta / d theta|.

After the burn-in, each sweep additionally draws a full state trajectory
conditional on the current parameters (the Gibbs block). Adaptation and
Metropolis moves continue after burn-in; nothing is frozen.

A -inf kernel is an ordinary rejection; only NaN is treated as a failure.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import ModelConfig, ModelSpecKind, SamplerConfig
from .errors import ConfigurationError, InitializationError, NumericalError
from .panel import Panel
from .priors import (
    ParameterSpec,
    log_jacobian,
    log_prior,
    prior_medians,
    sample_prior,
    to_bounded,
    to_unbounded,
)
from .statespace import SystemMatrices, loglik, simulate_states

STATE_ARCHIVE_MAGIC = b"GTSD"
STATE_ARCHIVE_VERSION = 1


@dataclass
class EstimationProblem:
    """A parameter layout plus a builder mapping bounded values to a system."""

    layout: list[ParameterSpec]
    build: Callable[[np.ndarray], SystemMatrices]
    name: str = ""

    @property
    def parameter_names(self) -> list[str]:
        return [p.name for p in self.layout]


def problem_for_spec(
    spec: ModelSpecKind, model_config: ModelConfig | None = None
) -> EstimationProblem:
    from .model import build_system, parameter_layout

    config = model_config or ModelConfig()
    layout = parameter_layout(spec, config)
    return EstimationProblem(
        layout=layout,
        build=lambda values: build_system(values, spec, config),
        name=spec.value,
    )


def make_posterior_kernel(
    problem: EstimationProblem, panel: Panel
) -> Callable[[np.ndarray], float]:
    """Log posterior kernel on the unbounded scale.

    Numerical failures inside the likelihood map to -inf so the sampler
    rejects the offending candidate instead of crashing mid-chain.
    """
    specs = problem.layout

    def kernel(theta: np.ndarray) -> float:
        jac = log_jacobian(theta, specs)
        bounded = to_bounded(theta, specs)
        lp = log_prior(bounded, specs)
        if lp == -math.inf:
            return -math.inf
        try:
            system = problem.build(bounded)
            ll = loglik(system, panel)
        except NumericalError:
            return -math.inf
        return ll + lp + jac

    return kernel


def adapt_sigma(
    sigma_prev: float,
    alpha_prev: float,
    j: int,
    target_accept: float = 0.44,
    adapt_start: int = 10,
) -> float:
    """Proposal standard deviation update: pinned at 1 early, then
    multiplicative drift toward the target acceptance."""
    if sigma_prev <= 0:
        raise ConfigurationError("proposal standard deviation must be positive")
    if j <= adapt_start:
        return 1.0
    return float(np.exp(alpha_prev - target_accept) * sigma_prev)


@dataclass
class MHStep:
    theta: np.ndarray
    accepted: bool
    alpha: float
    value: float


def mh_step(
    theta: np.ndarray,
    k: int,
    sigma_k: float,
    posterior_kernel: Callable[[np.ndarray], float],
    rng: np.random.Generator,
    current_value: float | None = None,
) -> MHStep:
    """Single-component Gaussian Metropolis step on the unbounded scale."""
    if current_value is None:
        current_value = posterior_kernel(theta)
    candidate = theta.copy()
    candidate[k] = candidate[k] + sigma_k * rng.standard_normal()
    cand_value = posterior_kernel(candidate)
    if math.isnan(cand_value):
        raise NumericalError(f"posterior kernel returned NaN at component {k}")
    if cand_value == -math.inf:
        rng.random()  # keep the stream aligned across accept/reject paths
        return MHStep(theta=theta, accepted=False, alpha=0.0, value=current_value)
    delta = cand_value - current_value
    alpha = 1.0 if delta >= 0 else float(np.exp(delta))
    u = rng.random()
    accepted = True if u <= 0.0 else math.log(u) < delta
    if accepted:
        return MHStep(theta=candidate, accepted=True, alpha=alpha, value=cand_value)
    return MHStep(theta=theta, accepted=False, alpha=alpha, value=current_value)


@dataclass
class PosteriorDraws:
    """Retained parameter draws (bounded scale) and Gibbs state draws."""

    parameter_names: list[str]
    parameters: np.ndarray  # (n_retained, n_params)
    acceptance: np.ndarray  # (n_iter, n_params), 0/1 outcomes
    proposal_scales: np.ndarray  # final per-parameter proposal sd
    kernels: np.ndarray  # kernel value per retained sweep
    states: np.ndarray | None = None  # (n_state_draws, n_time, n_state)
    state_sweeps: np.ndarray | None = None  # absolute sweep index per state draw
    first_retained_sweep: int = 0

    @property
    def n_retained(self) -> int:
        return self.parameters.shape[0]

    def acceptance_rate(self, last: int | None = None) -> np.ndarray:
        hist = self.acceptance if last is None else self.acceptance[-last:]
        return hist.mean(axis=0)

    def posterior_mean(self) -> np.ndarray:
        return self.parameters.mean(axis=0)

    def credible_interval(self, level: float = 0.90) -> np.ndarray:
        lo = (1.0 - level) / 2.0
        return np.quantile(self.parameters, [lo, 1.0 - lo], axis=0)

    def save_params_csv(self, path) -> None:
        """Long-format CSV: sweep, parameter name, bounded value."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("sweep,parameter,value\n")
            for i in range(self.n_retained):
                sweep = self.first_retained_sweep + i
                for name, value in zip(self.parameter_names, self.parameters[i]):
                    fh.write(f"{sweep},{name},{float(value)!r}\n")

    def save_states_bin(self, path) -> None:
        """Binary archive: magic, version, dims, little-endian float64 data.

        Layout: 4-byte magic "GTSD", uint32 version, three uint64 dims
        (draws, time, state), then the draws x time x state array in C
        order.
        """
        if self.states is None:
            raise ConfigurationError("no state draws to save")
        arr = np.ascontiguousarray(self.states, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(STATE_ARCHIVE_MAGIC)
            fh.write(struct.pack("<I", STATE_ARCHIVE_VERSION))
            fh.write(struct.pack("<QQQ", *arr.shape))
            fh.write(arr.tobytes())


def load_params_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Inverse of save_params_csv: names, draws matrix, sweep indices."""
    import csv

    rows: dict[int, dict[str, float]] = {}
    names: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            sweep = int(rec["sweep"])
            rows.setdefault(sweep, {})[rec["parameter"]] = float(rec["value"])
            if rec["parameter"] not in names:
                names.append(rec["parameter"])
    sweeps = sorted(rows)
    data = np.array([[rows[s][n] for n in names] for s in sweeps])
    return names, data, np.array(sweeps)


def load_states_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != STATE_ARCHIVE_MAGIC:
            raise ConfigurationError(f"{path} is not a state-draw archive")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != STATE_ARCHIVE_VERSION:
            raise ConfigurationError(f"unsupported state archive version {version}")
        shape = struct.unpack("<QQQ", fh.read(24))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape)


def _initial_theta(
    specs: list[ParameterSpec],
    kernel: Callable[[np.ndarray], float],
    config: SamplerConfig,
    rng: np.random.Generator,
    theta0_bounded: np.ndarray | None,
) -> tuple[np.ndarray, float]:
    if theta0_bounded is not None:
        start = np.asarray(theta0_bounded, dtype=float)
    else:
        start = prior_medians(specs)
    theta = to_unbounded(start, specs)
    value = kernel(theta)
    if config.init_search > 0:
        for _ in range(config.init_search):
            cand_bounded = sample_prior(specs, rng)
            try:
                cand = to_unbounded(cand_bounded, specs)
            except Exception:
                continue
            v = kernel(cand)
            if math.isnan(v):
                continue
            if v > value or math.isinf(value):
                theta, value = cand, v
    if math.isnan(value) or value == -math.inf:
        raise InitializationError(
            "posterior kernel is not evaluable at the starting values; "
            "supply different initial values or set init_search > 0"
        )
    return theta, value


def run_chain(
    config: SamplerConfig,
    spec: ModelSpecKind | EstimationProblem,
    panel: Panel,
    model_config: ModelConfig | None = None,
    theta0: np.ndarray | None = None,
    kernel: Callable[[np.ndarray], float] | None = None,
) -> PosteriorDraws:
    """Run one adaptive Metropolis-within-Gibbs chain.

    ``spec`` may be a model variant (the nine-variable system is built
    internally) or any EstimationProblem. A custom ``kernel`` replaces the
    likelihood-prior-Jacobian composition, which tests use to instrument
    the chain.
    """
    problem = (
        spec
        if isinstance(spec, EstimationProblem)
        else problem_for_spec(spec, model_config)
    )
    specs = problem.layout
    nk = len(specs)
    rng = np.random.default_rng(config.seed)
    posterior = kernel if kernel is not None else make_posterior_kernel(problem, panel)

    theta, current = _initial_theta(specs, posterior, config, rng, theta0)

    sigma = np.ones(nk)
    acceptance = np.zeros((config.n_iter, nk), dtype=np.int8)
    n_retained = config.n_iter - config.burn_in
    parameters = np.empty((n_retained, nk))
    kernels = np.empty(n_retained)
    collect_states = config.state_draws_enabled
    state_draws: list[np.ndarray] = []
    state_sweeps: list[int] = []

    for j in range(1, config.n_iter + 1):
        order = rng.permutation(nk)
        for k in order:
            if config.accept_window > 0:
                lo = max(0, j - 1 - config.accept_window)
                hist = acceptance[lo : j - 1, k]
                alpha_prev = float(hist.mean()) if hist.size else 0.0
            else:
                alpha_prev = float(acceptance[j - 2, k]) if j >= 2 else 0.0
            sigma[k] = adapt_sigma(
                sigma[k],
                alpha_prev,
                j,
                target_accept=config.target_accept,
                adapt_start=config.adapt_start,
            )
            step = mh_step(theta, k, sigma[k], posterior, rng, current_value=current)
            theta = step.theta
            current = step.value
            acceptance[j - 1, k] = 1 if step.accepted else 0

        if j > config.burn_in:
            idx = j - config.burn_in - 1
            bounded = to_bounded(theta, specs)
            parameters[idx] = bounded
            kernels[idx] = current
            if collect_states and idx % config.state_draw_thin == 0:
                system = problem.build(bounded)
                seed = int(rng.integers(0, 2**63 - 1))
                state_draws.append(simulate_states(system, panel, seed))
                state_sweeps.append(j)

    return PosteriorDraws(
        parameter_names=problem.parameter_names,
        parameters=parameters,
        acceptance=acceptance,
        proposal_scales=sigma,
        kernels=kernels,
        states=np.stack(state_draws) if state_draws else None,
        state_sweeps=np.array(state_sweeps) if state_sweeps else None,
        first_retained_sweep=config.burn_in + 1,
    )
