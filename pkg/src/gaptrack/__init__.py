"""Real-time Bayesian trend-cycle estimation toolkit."""

from .config import AppConfig, ModelSpecKind, SamplerConfig, load_config
from .errors import (
    ConfigurationError,
    DomainError,
    GaptrackError,
    InitializationError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .panel import Panel
from .statespace import (
    FilterOutput,
    Forecast,
    SmoothedStates,
    SystemMatrices,
    filter_diffuse,
    forecast,
    loglik,
    simulate_states,
    smooth,
    smoothed_mean,
)

__version__ = "0.1.0"
