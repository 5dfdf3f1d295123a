from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaptrack.panel import Panel
from gaptrack.statespace import SystemMatrices


def make_panel(values, mask=None, scales=None, series=None, start="2000-01"):
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = np.isfinite(values)
    return Panel(
        values=values,
        mask=np.asarray(mask, dtype=bool),
        start=pd.Period(start, freq="M"),
        series=series or [],
        scales=scales,
    )


def local_level_model(sigma_eps=0.5, sigma_eta=0.3):
    """One random-walk state observed with noise; the state is diffuse."""
    return SystemMatrices(
        Z=np.array([[1.0]]),
        T=np.array([[1.0]]),
        c=np.zeros(1),
        R=np.eye(1),
        Q=np.array([[sigma_eta**2]]),
        H=np.array([[sigma_eps**2]]),
        diffuse_flags=np.array([True]),
        layout={"level": 0},
    )


@pytest.fixture(scope="session")
def warmed_kernels():
    """Trigger JIT compilation once so timed tests measure runtime only."""
    from gaptrack.statespace import filter_diffuse, simulate_states, smooth

    model = local_level_model()
    panel = make_panel(np.arange(6.0).reshape(-1, 1))
    filter_diffuse(model, panel)
    smooth(model, panel)
    simulate_states(model, panel, seed=0)
    return True
