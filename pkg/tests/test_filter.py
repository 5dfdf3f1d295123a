"""Exact-diffuse univariate filter against independent oracles."""

from __future__ import annotations

import numpy as np
import pytest

from gaptrack.errors import ConfigurationError, NumericalError
from gaptrack.statespace import SystemMatrices, filter_diffuse, loglik

from conftest import local_level_model, make_panel
from oracles import (
    KAPPA,
    diffuse_loglik_correction,
    multivariate_filter,
    random_stable_model,
    univariate_kappa_filter,
)


def test_local_level_loglik_matches_large_kappa_oracle(warmed_kernels):
    model = local_level_model(sigma_eps=0.5, sigma_eta=0.3)
    rng = np.random.default_rng(7)
    y = np.cumsum(rng.standard_normal(10)).reshape(-1, 1)
    panel = make_panel(y)

    out = filter_diffuse(model, panel)
    oracle = multivariate_filter(model, y, panel.mask)
    corrected = oracle["loglik"] + diffuse_loglik_correction(model)

    assert out.d == 1
    assert out.diffuse_complete
    assert abs(out.loglik - corrected) < 1e-4


def test_all_missing_panel_gives_zero_loglik(warmed_kernels):
    model = local_level_model()
    values = np.full((8, 1), np.nan)
    panel = make_panel(values, mask=np.zeros((8, 1), dtype=bool))
    out = filter_diffuse(model, panel)
    assert out.loglik == 0.0
    assert out.d == 0
    assert not out.diffuse_complete
    # no data: predicted moments follow the unconditional recursions
    np.testing.assert_allclose(out.predicted_mean, 0.0)
    np.testing.assert_allclose(out.predicted_cov_inf[0], np.eye(1))
    np.testing.assert_allclose(
        out.predicted_cov[:, 0, 0], 0.3**2 * np.arange(8)
    )


def test_univariate_equals_multivariate_no_diffuse(warmed_kernels):
    rng = np.random.default_rng(11)
    model = random_stable_model(rng, n_state=3, n_obs=2, n_diffuse=0)
    y = rng.standard_normal((40, 2))
    panel = make_panel(y)
    out = filter_diffuse(model, panel)
    oracle = multivariate_filter(model, y, panel.mask)
    assert abs(out.loglik - oracle["loglik"]) < 1e-8


@pytest.mark.parametrize("seed", range(12))
def test_univariate_equals_multivariate_random_models(seed, warmed_kernels):
    rng = np.random.default_rng(1000 + seed)
    model = random_stable_model(
        rng, n_state=int(rng.integers(2, 7)), n_obs=int(rng.integers(1, 4))
    )
    y = rng.standard_normal((30, model.n_obs))
    mask = rng.random(y.shape) < 0.85
    panel = make_panel(np.where(mask, y, np.nan), mask=mask)
    out = filter_diffuse(model, panel)
    oracle = multivariate_filter(model, y, mask)
    assert abs(out.loglik - oracle["loglik"]) < 1e-8
    np.testing.assert_allclose(out.filtered_mean, oracle["filtered_mean"], atol=1e-8)
    np.testing.assert_allclose(out.filtered_cov, oracle["filtered_cov"], atol=1e-8)


@pytest.mark.parametrize("seed,n_diffuse", [(0, 1), (1, 2), (2, 3)])
def test_diffuse_filtered_moments_match_large_kappa(seed, n_diffuse, warmed_kernels):
    rng = np.random.default_rng(2000 + seed)
    model = random_stable_model(rng, n_state=4 + n_diffuse, n_obs=3, n_diffuse=n_diffuse)
    _, y = __import__("oracles").simulate_from_model(model, 25, rng)
    panel = make_panel(y)
    out = filter_diffuse(model, panel)
    oracle = univariate_kappa_filter(model, y, panel.mask, kappa=KAPPA)
    assert out.diffuse_complete
    # compare filtered moments at every time after the diffuse phase ended
    t0 = int(np.ceil(out.d / model.n_obs))
    np.testing.assert_allclose(
        out.filtered_mean[t0:], oracle["filtered_mean"][t0:], atol=1e-4
    )
    np.testing.assert_allclose(
        out.filtered_cov[t0:], oracle["filtered_cov"][t0:], atol=1e-4
    )
    corrected = oracle["loglik"] + diffuse_loglik_correction(model)
    assert abs(out.loglik - corrected) < 1e-4


def test_missing_data_monotonicity(warmed_kernels):
    rng = np.random.default_rng(5)
    model = random_stable_model(rng, n_state=3, n_obs=2)
    y = rng.standard_normal((12, 2))
    full_mask = np.ones_like(y, dtype=bool)
    base = loglik(model, make_panel(y, mask=full_mask))

    reduced_mask = full_mask.copy()
    reduced_mask[4, 1] = False
    # deleting the observation: identical whether the value is hidden by the
    # mask or physically absent (NaN)
    hidden = loglik(model, make_panel(y, mask=reduced_mask))
    y_absent = y.copy()
    y_absent[4, 1] = np.nan
    absent = loglik(model, make_panel(y_absent, mask=reduced_mask))
    assert hidden == absent
    assert reduced_mask.sum() == full_mask.sum() - 1
    assert hidden != base


def test_non_diagonal_H_rejected():
    with pytest.raises(ConfigurationError):
        SystemMatrices(
            Z=np.eye(2),
            T=0.5 * np.eye(2),
            c=np.zeros(2),
            R=np.eye(2),
            Q=np.eye(2),
            H=np.array([[1.0, 0.2], [0.2, 1.0]]),
        )


def test_nonfinite_observation_raises_with_time_index(warmed_kernels):
    model = local_level_model()
    y = np.ones((6, 1))
    y[3, 0] = np.inf
    panel = make_panel(y, mask=np.ones((6, 1), dtype=bool))
    with pytest.raises(NumericalError) as err:
        filter_diffuse(model, panel)
    assert err.value.time_index == 3


def test_layout_must_be_bijection():
    with pytest.raises(ConfigurationError):
        SystemMatrices(
            Z=np.eye(2),
            T=0.5 * np.eye(2),
            c=np.zeros(2),
            R=np.eye(2),
            Q=np.eye(2),
            layout={"a": 0, "b": 0},
        )


def test_stationary_block_spectral_radius_validated():
    with pytest.raises(ConfigurationError):
        SystemMatrices(
            Z=np.eye(1),
            T=np.array([[1.0]]),
            c=np.zeros(1),
            R=np.eye(1),
            Q=np.eye(1),
            diffuse_flags=np.array([False]),
        )


def test_json_dump_round_trip(tmp_path):
    model = local_level_model()
    path = tmp_path / "system.json"
    model.dump_json(path)
    import json

    doc = json.loads(path.read_text())
    assert doc["layout"] == {"level": 0}
    assert doc["Z"] == [[1.0]]
    assert doc["diffuse_flags"] == [1]
