"""Spatiotemporal hotspot forecasting with KDE lags and random Fourier features.

Events are binned onto a rotated grid and modelled as independent Poisson
counts whose log-intensity is linear in lagged kernel-density features plus
random Fourier features approximating a Gaussian-process surface. Fitting
uses penalised proximal gradient ascent, and hotspots are picked by
forecast intensity under an area budget.
"""
from .config import HyperParams, competition_config, derive_seed, load_hyperparams
from .events import EventSet, load_events, write_events
from .forecast import PipelineOptions, fit_model, forecast_at, rolling_forecast, score_forecast
from .geometry import GridSpec, StudyRegion, build_grid
from .metrics import ScoreReport, Selection, score, select_hotspots

__version__ = "0.1.0"

__all__ = [
    "EventSet", "GridSpec", "HyperParams", "PipelineOptions", "ScoreReport", "Selection",
    "StudyRegion", "build_grid", "competition_config", "derive_seed", "fit_model",
    "forecast_at", "load_events", "load_hyperparams", "rolling_forecast", "score",
    "score_forecast", "select_hotspots", "write_events",
]
