"""Prior families, bounded/unbounded parameter duals, and their Jacobians.

Three prior families are supported. Each induces a transform carrying its
bounded support onto the whole real line, so the sampler can propose freely:

    normal          identity                     theta = Theta
    inverse gamma   log of the excess            theta = log(Theta - a)
    uniform         log odds of the position     theta = log((Theta-a)/(b-Theta))

The log-Jacobian of each inverse transform is added to the posterior kernel;
an out-of-support bounded value yields a log prior of -inf (a value, not an
exception, so the sampler rejects gracefully).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError, DomainError

_EXP_MAX = 709.0  # exp saturates just above this in float64


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise ConfigurationError("normal prior needs sd > 0")

    @property
    def bounds(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def log_density(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * math.log(2.0 * math.pi) - math.log(self.sd) - 0.5 * z * z

    def median(self) -> float:
        return self.mean

    def sample(self, rng: np.random.Generator) -> float:
        return self.mean + self.sd * rng.standard_normal()


@dataclass(frozen=True)
class InverseGammaPrior:
    """Inverse gamma on the excess over the lower bound: x - lower ~ IG(shape, scale)."""

    shape: float
    scale: float
    lower: float = 0.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ConfigurationError("inverse gamma prior needs shape > 0 and scale > 0")
        if not math.isfinite(self.lower):
            raise ConfigurationError("inverse gamma prior needs a finite lower bound")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lower, math.inf)

    def log_density(self, x: float) -> float:
        y = x - self.lower
        if y <= 0:
            return -math.inf
        return (
            self.shape * math.log(self.scale)
            - math.lgamma(self.shape)
            - (self.shape + 1.0) * math.log(y)
            - self.scale / y
        )

    def median(self) -> float:
        return self.lower + float(
            stats.invgamma.ppf(0.5, self.shape, scale=self.scale)
        )

    def mode(self) -> float:
        return self.lower + self.scale / (self.shape + 1.0)

    def sample(self, rng: np.random.Generator) -> float:
        return self.lower + self.scale / rng.gamma(self.shape)


@dataclass(frozen=True)
class UniformPrior:
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower < self.upper):
            raise ConfigurationError("uniform prior needs lower < upper")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConfigurationError("uniform prior needs finite bounds")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def log_density(self, x: float) -> float:
        if self.lower < x < self.upper:
            return -math.log(self.upper - self.lower)
        return -math.inf

    def median(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng: np.random.Generator) -> float:
        return rng.uniform(self.lower, self.upper)


Prior = Union[NormalPrior, InverseGammaPrior, UniformPrior]


@dataclass(frozen=True)
class ParameterSpec:
    """Named parameter with its prior; bounds follow from the prior family."""

    name: str
    prior: Prior

    @property
    def bounds(self) -> tuple[float, float]:
        return self.prior.bounds


def _check_length(values, specs) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.shape[0] != len(specs):
        raise ConfigurationError(
            f"parameter vector has length {arr.shape[0]}, layout expects {len(specs)}"
        )
    return arr


def to_unbounded(theta_bounded, specs: list[ParameterSpec]) -> np.ndarray:
    """Map bounded parameter values onto the real line, per prior family."""
    vals = _check_length(theta_bounded, specs)
    out = np.empty_like(vals)
    for j, (v, spec) in enumerate(zip(vals, specs)):
        prior = spec.prior
        if isinstance(prior, NormalPrior):
            out[j] = v
        elif isinstance(prior, InverseGammaPrior):
            if v <= prior.lower:
                raise DomainError(
                    f"parameter {spec.name} = {v} is at or below its lower bound {prior.lower}"
                )
            out[j] = math.log(v - prior.lower)
        else:
            a, b = prior.lower, prior.upper
            if not (a < v < b):
                raise DomainError(
                    f"parameter {spec.name} = {v} is outside its bounds ({a}, {b})"
                )
            out[j] = math.log((v - a) / (b - v))
    return out


def to_bounded(theta_unbounded, specs: list[ParameterSpec]) -> np.ndarray:
    """Inverse transform; results are strictly inside the bounds."""
    vals = _check_length(theta_unbounded, specs)
    out = np.empty_like(vals)
    for j, (t, spec) in enumerate(zip(vals, specs)):
        prior = spec.prior
        if isinstance(prior, NormalPrior):
            out[j] = t
        elif isinstance(prior, InverseGammaPrior):
            out[j] = math.exp(min(t, _EXP_MAX)) + prior.lower
        else:
            a, b = prior.lower, prior.upper
            v = a + (b - a) * float(special.expit(t))
            # saturate strictly inside the interval
            v = min(max(v, math.nextafter(a, b)), math.nextafter(b, a))
            out[j] = v
    return out


def log_jacobian(theta_unbounded, specs: list[ParameterSpec]) -> float:
    """Sum of log |d Theta / d theta| over components."""
    vals = _check_length(theta_unbounded, specs)
    total = 0.0
    for t, spec in zip(vals, specs):
        prior = spec.prior
        if isinstance(prior, NormalPrior):
            continue
        if isinstance(prior, InverseGammaPrior):
            total += t
        else:
            a, b = prior.lower, prior.upper
            total += math.log(b - a) + t - 2.0 * float(np.logaddexp(0.0, t))
    return float(total)


def log_prior(theta_bounded, specs: list[ParameterSpec]) -> float:
    """Sum of log prior densities; -inf outside any support."""
    vals = _check_length(theta_bounded, specs)
    total = 0.0
    for v, spec in zip(vals, specs):
        ld = spec.prior.log_density(float(v))
        if ld == -math.inf:
            return -math.inf
        total += ld
    return float(total)


def prior_medians(specs: list[ParameterSpec]) -> np.ndarray:
    return np.array([spec.prior.median() for spec in specs])


def sample_prior(specs: list[ParameterSpec], rng: np.random.Generator) -> np.ndarray:
    return np.array([spec.prior.sample(rng) for spec in specs])
