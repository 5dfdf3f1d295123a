"""Transforms, Jacobians, and prior densities."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gaptrack.errors import ConfigurationError, DomainError
from gaptrack.priors import (
    InverseGammaPrior,
    NormalPrior,
    ParameterSpec,
    UniformPrior,
    log_jacobian,
    log_prior,
    prior_medians,
    to_bounded,
    to_unbounded,
)


def spec_of(prior, name="x"):
    return [ParameterSpec(name=name, prior=prior)]


def test_normal_transform_is_identity():
    specs = spec_of(NormalPrior(0.0, 1.0))
    assert to_unbounded([0.3], specs)[0] == 0.3
    assert to_bounded([0.3], specs)[0] == 0.3


def test_uniform_midpoint_maps_to_zero():
    specs = spec_of(UniformPrior(0.0, 1.0))
    assert to_unbounded([0.5], specs)[0] == 0.0
    assert to_bounded([0.0], specs)[0] == 0.5


def test_inverse_gamma_log_excess():
    specs = spec_of(InverseGammaPrior(shape=3.0, scale=1.0, lower=1.0))
    # log(2.5 - 1) = log(1.5)
    assert to_unbounded([2.5], specs)[0] == pytest.approx(0.4054651081081644, abs=1e-12)
    specs0 = spec_of(InverseGammaPrior(shape=3.0, scale=1.0, lower=0.0))
    assert to_bounded([0.0], specs0)[0] == pytest.approx(1.0, abs=1e-15)


def test_round_trip_1000_random_admissible_values():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(1000):
        pick = rng.integers(3)
        if pick == 0:
            prior = NormalPrior(rng.normal(), rng.uniform(0.1, 3.0))
            value = rng.normal(scale=5.0)
        elif pick == 1:
            lower = rng.normal()
            prior = InverseGammaPrior(rng.uniform(0.5, 5), rng.uniform(0.1, 5), lower)
            value = lower + rng.uniform(0.01, 50.0)
        else:
            a = rng.normal()
            b = a + rng.uniform(0.1, 10.0)
            prior = UniformPrior(a, b)
            value = a + (b - a) * rng.uniform(0.01, 0.99)
        specs = spec_of(prior)
        back = to_bounded(to_unbounded([value], specs), specs)[0]
        worst = max(worst, abs(back - value))
    assert worst < 1e-12


def test_out_of_bounds_value_names_parameter():
    specs = spec_of(UniformPrior(0.0, 1.0), name="damping")
    with pytest.raises(DomainError, match="damping"):
        to_unbounded([1.0], specs)
    specs_ig = spec_of(InverseGammaPrior(2.0, 1.0, lower=0.5), name="variance")
    with pytest.raises(DomainError, match="variance"):
        to_unbounded([0.5], specs_ig)


def test_to_bounded_saturates_strictly_inside():
    specs = spec_of(UniformPrior(0.0, 1.0))
    assert 0.0 < to_bounded([800.0], specs)[0] < 1.0
    assert 0.0 < to_bounded([-800.0], specs)[0] < 1.0
    specs_ig = spec_of(InverseGammaPrior(2.0, 1.0))
    assert math.isfinite(to_bounded([800.0], specs_ig)[0])


def test_log_jacobian_values():
    all_normal = [
        ParameterSpec("a", NormalPrior(0, 1)),
        ParameterSpec("b", NormalPrior(2, 3)),
    ]
    assert log_jacobian([0.4, -1.2], all_normal) == 0.0

    uniform = spec_of(UniformPrior(0.0, 1.0))
    assert log_jacobian([0.0], uniform) == pytest.approx(-1.3862943611198906, abs=1e-9)

    ig = spec_of(InverseGammaPrior(2.0, 1.0))
    assert log_jacobian([0.4054651], ig) == pytest.approx(0.4054651, abs=1e-12)


def test_log_prior_values():
    uniform = spec_of(UniformPrior(0.0, 1.0))
    assert log_prior([0.7], uniform) == 0.0
    assert log_prior([1.2], uniform) == -math.inf

    normal = spec_of(NormalPrior(0.0, 1.0))
    assert log_prior([0.0], normal) == pytest.approx(-0.9189385332046727, abs=1e-12)


def test_inverse_gamma_density_matches_quadrature_at_mode():
    prior = InverseGammaPrior(shape=2.5, scale=1.3, lower=0.7)

    def kernel(y):
        return y ** -(prior.shape + 1.0) * math.exp(-prior.scale / y)

    norm, _ = integrate.quad(kernel, 0.0, np.inf)
    mode = prior.mode()
    numeric = kernel(mode - prior.lower) / norm
    assert math.exp(prior.log_density(mode)) == pytest.approx(numeric, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(
    pick=st.integers(0, 2),
    theta=st.floats(-5.0, 5.0),
    p1=st.floats(0.2, 4.0),
    p2=st.floats(0.2, 4.0),
)
def test_log_jacobian_matches_central_differences(pick, theta, p1, p2):
    if pick == 0:
        prior = NormalPrior(p1 - 2.0, p2)
    elif pick == 1:
        prior = InverseGammaPrior(p1, p2, lower=-1.0)
    else:
        prior = UniformPrior(-p1, p2)
    specs = spec_of(prior)
    h = 1e-6
    up = to_bounded([theta + h], specs)[0]
    dn = to_bounded([theta - h], specs)[0]
    numeric = math.log((up - dn) / (2.0 * h))
    assert abs(log_jacobian([theta], specs) - numeric) < 1e-5


def test_uniform_reparameterization_jacobian_shift():
    # two uniform supports sharing a midpoint: at that point the Jacobian
    # difference is exactly the log width ratio and the prior term cancels
    # it, leaving the posterior kernel unchanged
    narrow = UniformPrior(0.2, 0.8)
    wide = UniformPrior(-0.4, 1.4)
    value = 0.5
    th_n = to_unbounded([value], spec_of(narrow))
    th_w = to_unbounded([value], spec_of(wide))
    jac_diff = log_jacobian(th_w, spec_of(wide)) - log_jacobian(th_n, spec_of(narrow))
    assert jac_diff == pytest.approx(math.log(1.8 / 0.6), abs=1e-12)
    kernel_n = log_prior([value], spec_of(narrow)) + log_jacobian(th_n, spec_of(narrow))
    kernel_w = log_prior([value], spec_of(wide)) + log_jacobian(th_w, spec_of(wide))
    assert kernel_w == pytest.approx(kernel_n, abs=1e-12)


def test_prior_medians():
    specs = [
        ParameterSpec("n", NormalPrior(1.5, 2.0)),
        ParameterSpec("u", UniformPrior(0.0, 4.0)),
        ParameterSpec("ig", InverseGammaPrior(2.0, 1.0, lower=1.0)),
    ]
    med = prior_medians(specs)
    assert med[0] == 1.5
    assert med[1] == 2.0
    assert med[2] > 1.0


def test_invalid_prior_configurations_rejected():
    with pytest.raises(ConfigurationError):
        UniformPrior(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        NormalPrior(0.0, 0.0)
    with pytest.raises(ConfigurationError):
        InverseGammaPrior(0.0, 1.0)
