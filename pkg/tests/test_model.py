"""Trend-cycle system construction and component extraction."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaptrack.config import ModelConfig, ModelSpecKind
from gaptrack.errors import DomainError
from gaptrack.model import (
    ComponentSeries,
    build_system,
    extract_components,
    observable_roles,
    output_gap_pct,
    parameter_layout,
    parameter_names,
    state_names,
)
from gaptrack.priors import UniformPrior
from gaptrack.simulate import full_model_true_params, generate_full_panel
from gaptrack.statespace import loglik, smooth

from conftest import make_panel

UND = ModelSpecKind.UNDISCIPLINED
TRK = ModelSpecKind.TRACKING


def true_vector(spec):
    values = full_model_true_params(spec)
    return np.array([values[n] for n in parameter_names(spec)])


def test_layout_identical_across_specs():
    a = parameter_layout(UND)
    b = parameter_layout(TRK)
    assert [p.name for p in a] == [p.name for p in b]
    assert [p.prior for p in a] == [p.prior for p in b]


def test_layout_bounds():
    for p in parameter_layout(UND):
        if "_rho_" in p.name or p.name.startswith("cycle_rho"):
            assert p.bounds == (0.0, 1.0)
        if "_var" in p.name:
            assert p.bounds[0] == 0.0


def test_gap_loading_count():
    names = parameter_names(UND)
    gammas = [n for n in names if n.startswith("gap_load_")]
    assert len(gammas) == 24  # six variables, four lags each


def test_layout_deterministic():
    assert parameter_names(UND) == parameter_names(UND)
    assert state_names() == state_names()


def test_zero_damping_gives_zero_cycle_block():
    values = full_model_true_params(UND)
    values["cycle_rho_gap"] = 0.0
    system = build_system(values, UND)
    i = system.layout["cycle_gap"]
    j = system.layout["cycle_gap_aux"]
    block = system.T[np.ix_([i, j], [i, j])]
    np.testing.assert_array_equal(block, 0.0)


def test_tracking_adds_one_row_same_states():
    und = build_system(full_model_true_params(UND), UND)
    trk = build_system(full_model_true_params(TRK), TRK)
    assert trk.n_obs == und.n_obs + 1
    assert trk.n_state == und.n_state
    # shared rows are identical
    np.testing.assert_array_equal(trk.Z[1:], und.Z)


def test_cycle_block_eigenvalues():
    values = full_model_true_params(UND)
    values["cycle_rho_gap"] = 0.95
    values["cycle_lambda_gap"] = np.pi / 30.0
    system = build_system(values, UND)
    i = system.layout["cycle_gap"]
    j = system.layout["cycle_gap_aux"]
    eig = np.linalg.eigvals(system.T[np.ix_([i, j], [i, j])])
    np.testing.assert_allclose(np.abs(eig), 0.95, atol=1e-12)
    np.testing.assert_allclose(np.abs(np.angle(eig)), np.pi / 30.0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(rho=st.floats(0.0, 0.999), lam=st.floats(0.0, np.pi))
def test_cycle_spectral_radius_equals_damping(rho, lam):
    values = full_model_true_params(UND)
    values["idio_rho_oil"] = rho
    values["idio_lambda_oil"] = lam
    system = build_system(values, UND)
    i = system.layout["idio_oil"]
    j = system.layout["idio_oil_aux"]
    eig = np.linalg.eigvals(system.T[np.ix_([i, j], [i, j])])
    assert np.max(np.abs(eig)) == pytest.approx(rho, abs=1e-10)


def test_out_of_bounds_parameter_names_offender():
    values = full_model_true_params(UND)
    values["idio_rho_cpi"] = 1.0
    with pytest.raises(DomainError, match="idio_rho_cpi"):
        build_system(values, UND)
    values = full_model_true_params(UND)
    values["trend_var_oil"] = -0.1
    with pytest.raises(DomainError, match="trend_var_oil"):
        build_system(values, UND)


def test_spec_nesting_masked_cbo_matches_undisciplined(warmed_kernels):
    panel_trk, _, _ = generate_full_panel(TRK, months=200, seed=31)
    mask = panel_trk.mask.copy()
    cbo = panel_trk.series.index("cbo_cycle")
    mask[:, cbo] = False
    masked_trk = make_panel(panel_trk.values, mask=mask, series=panel_trk.series)

    und_values = np.delete(panel_trk.values, cbo, axis=1)
    und_mask = np.delete(panel_trk.mask, cbo, axis=1)
    panel_und = make_panel(
        und_values, mask=und_mask, series=[r for r in panel_trk.series if r != "cbo_cycle"]
    )

    vec = true_vector(TRK)
    ll_trk = loglik(build_system(vec, TRK), masked_trk)
    ll_und = loglik(build_system(vec, UND), panel_und)
    assert abs(ll_trk - ll_und) < 1e-10


def test_quarterly_aggregation_identity(warmed_kernels):
    panel, _, system = generate_full_panel(TRK, months=160, seed=5)
    sm = smooth(system, panel)
    sidx = system.layout
    latent = (
        sm.mean[:, sidx["cycle_gap"]]
        + sm.mean[:, sidx["idio_gdp"]]
        + sm.mean[:, sidx["trend_gdp"]]
    )
    col = panel.series.index("gdp")
    observed_rows = np.flatnonzero(panel.mask[:, col])
    for t in observed_rows:
        triplet = latent[t] + latent[t - 1] + latent[t - 2]
        assert abs(triplet - panel.values[t, col]) < 1e-6


def test_tracking_cbo_row_reproduced_at_observations(warmed_kernels):
    panel, _, system = generate_full_panel(TRK, months=160, seed=6)
    sm = smooth(system, panel)
    col = panel.series.index("cbo_cycle")
    fit = sm.mean @ system.Z[col]
    observed = np.flatnonzero(panel.mask[:, col])
    np.testing.assert_allclose(
        fit[observed], panel.values[observed, col], atol=1e-6
    )


def test_components_sum_to_observations(warmed_kernels):
    panel, _, system = generate_full_panel(UND, months=180, seed=11)
    sm = smooth(system, panel)
    vec = true_vector(UND)
    comp = extract_components(sm, vec, UND, panel.scales, months=panel.months)
    fitted = comp.fitted()
    observed = panel.mask
    denorm = panel.values * panel.scales
    np.testing.assert_allclose(fitted[observed], denorm[observed], atol=1e-6)


def test_zero_epc_loading_kills_epc_contribution(warmed_kernels):
    values = full_model_true_params(UND)
    values["epc_load_cpi"] = 0.0
    panel, _, system = generate_full_panel(UND, months=120, seed=3, true_params=values)
    sm = smooth(system, panel)
    comp = extract_components(sm, values, UND, panel.scales)
    cpi = comp.series.index("cpi")
    np.testing.assert_array_equal(comp.epc[:, cpi], 0.0)


def test_gap_recovery_correlates_with_truth(warmed_kernels):
    panel, states, system = generate_full_panel(UND, months=300, seed=21)
    sm = smooth(system, panel)
    gap_true = states[:, system.layout["cycle_gap"]]
    gap_est = sm.mean[:, system.layout["cycle_gap"]]
    corr = np.corrcoef(gap_true, gap_est)[0, 1]
    assert corr > 0.8


def test_components_identity_on_normalized_panel(tmp_path, warmed_kernels):
    # full round trip through vintage files and first-difference
    # normalization: the de-normalized smoothed fit reproduces every
    # observation
    from datetime import date

    from gaptrack.simulate import generate_full_dataset, write_vintage_csv
    from gaptrack.vintages import build_panel, load_vintage

    data = generate_full_dataset(UND, months=140, seed=29)
    path = tmp_path / "v.csv"
    series = {
        data.series_map[role].id: data.observations[role].dropna()
        for role in data.roles
    }
    write_vintage_csv(path, series, date(2030, 1, 1))
    panel = build_panel(
        load_vintage(path), UND, data.months, {r: data.series_map[r] for r in data.roles}
    )
    assert not np.allclose(panel.scales, 1.0)

    values = full_model_true_params(UND)
    system = build_system(values, UND)
    sm = smooth(system, panel)
    comp = extract_components(sm, values, UND, panel.scales, months=panel.months)
    fitted = comp.fitted()
    denorm = panel.denormalize()
    np.testing.assert_allclose(
        fitted[panel.mask], denorm[panel.mask], atol=1e-6
    )


def test_output_gap_pct_values():
    roles = observable_roles(UND)
    n = 4
    comp = ComponentSeries(
        series=roles,
        business_cycle=np.zeros((n, len(roles))),
        epc=np.zeros((n, len(roles))),
        idiosyncratic=np.zeros((n, len(roles))),
        trend=np.zeros((n, len(roles))),
        bias=np.zeros((n, len(roles))),
        monthly_gap_level=np.array([0.0, 2.0, -1.0, 2.0]),
        potential=np.array([100.0, 100.0, 50.0, 100.0]),
    )
    np.testing.assert_allclose(output_gap_pct(comp), [0.0, 2.0, -2.0, 2.0])

    comp.potential = np.array([100.0, -1.0, 50.0, 100.0])
    with pytest.raises(DomainError, match="index 1"):
        output_gap_pct(comp)


def test_h_jitter_switch(warmed_kernels):
    cfg = ModelConfig(h_jitter=1e-8)
    values = full_model_true_params(UND)
    system = build_system(values, UND, cfg)
    np.testing.assert_allclose(np.diag(system.H), 1e-8)

    base = build_system(values, UND)
    np.testing.assert_array_equal(base.H, 0.0)
    jittered = base.with_jitter(1e-8)
    np.testing.assert_allclose(np.diag(jittered.H), 1e-8)
    panel, _, _ = generate_full_panel(UND, months=60, seed=1)
    assert np.isfinite(loglik(jittered, panel))


def test_lambda_band_override_changes_prior():
    cfg = ModelConfig()
    cfg.prior_overrides["cycle_rho_gap"] = UniformPrior(0.5, 0.99)
    layout = parameter_layout(UND, cfg)
    by_name = {p.name: p for p in layout}
    assert by_name["cycle_rho_gap"].bounds == (0.5, 0.99)
