"""End-to-end forecasting: grid, stacked training periods, fit, predict, select.

A forecast made at ``cutoff`` covers the period ``(cutoff, cutoff + W]``
and only ever reads events with ``t <= cutoff``. Training rows are the
``W``-day periods ``(cutoff - k*W, cutoff - (k-1)*W]``, each featurised at
its own start time, for every ``k`` whose lag windows stay inside the
observed history.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import HyperParams
from .events import EventSet, as_event_set
from .geometry import (GridSpec, StudyRegion, active_cells, build_grid, cell_centroids,
                       points_to_cells)
from .glm import DesignMatrix, FitReport, ModelParams, OptimizerConfig, fit, predict
from .kde import InsufficientHistoryError, KdeConfig, kde_at_points
from .metrics import ScoreReport, Selection, score, select_hotspots
from .rff import FrequencyMatrix, featurize, sample_frequencies


@dataclass
class PipelineOptions:
    max_train_periods: int | None = None
    fit_intercept: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    truncate_kde: bool = False
    region_mask: object = None
    allow_out_of_bounds: bool = False
    region_area_sqft: float | None = None


@dataclass
class GridContext:
    region: StudyRegion
    grid: GridSpec
    active: np.ndarray
    centroids: np.ndarray   # active-cell centroids, (n_active, 2)
    flat_ids: np.ndarray    # active flat ids

    @classmethod
    def build(cls, region: StudyRegion, hp: HyperParams, options: PipelineOptions) -> "GridContext":
        grid = build_grid(region, hp.cell_w_ft, hp.cell_h_ft, hp.rotation_rad,
                          allow_out_of_bounds=options.allow_out_of_bounds)
        active = active_cells(grid, region, options.region_mask)
        ids = np.flatnonzero(active)
        return cls(region, grid, active, cell_centroids(grid)[ids], ids)


@dataclass
class FittedModel:
    hp: HyperParams
    ctx: GridContext
    params: ModelParams
    report: FitReport
    freqs: FrequencyMatrix | None
    cutoff: float
    window_days: float
    history_start: float
    n_train_periods: int


@dataclass
class Forecast:
    cutoff: float
    window_days: float
    intensities: np.ndarray  # per flat id; NaN on inactive cells
    selection: Selection
    design: DesignMatrix


def _rff_points(ctx: GridContext, t_mid: float) -> np.ndarray:
    n = len(ctx.flat_ids)
    return np.column_stack([ctx.centroids[:, 0] - ctx.region.min_x,
                            ctx.centroids[:, 1] - ctx.region.min_y,
                            np.full(n, t_mid)])


def period_rows(events: EventSet, ctx: GridContext, start: float, window_days: float,
                kde_cfg: KdeConfig, freqs: FrequencyMatrix | None, options: PipelineOptions,
                with_counts: bool = True) -> DesignMatrix:
    """Design rows for one period ``(start, start + W]`` over the active cells.

    Features read only events with ``t <= start``; counts read the period itself.
    """
    past = events.select(events.t <= start)
    kde = kde_at_points(past, ctx.centroids[:, 0], ctx.centroids[:, 1], start, kde_cfg,
                        truncate=options.truncate_kde)
    if freqs is None:
        rff = np.zeros((len(ctx.flat_ids), 0))
    else:
        rff = featurize(_rff_points(ctx, start + window_days / 2), freqs)
    if with_counts:
        m = (events.t > start) & (events.t <= start + window_days)
        cells = points_to_cells(ctx.grid, events.x[m], events.y[m], strict=False)
        full = np.bincount(cells[cells >= 0], minlength=ctx.grid.n_cells)
        counts = full[ctx.flat_ids]
    else:
        counts = np.zeros(len(ctx.flat_ids))
    n = len(ctx.flat_ids)
    return DesignMatrix(kde, rff, counts, period=np.full(n, start), flat_id=ctx.flat_ids.copy())


def stack(designs: list[DesignMatrix]) -> DesignMatrix:
    return DesignMatrix(np.vstack([d.kde_block for d in designs]),
                        np.vstack([d.rff_block for d in designs]),
                        np.concatenate([d.counts for d in designs]),
                        period=np.concatenate([d.period for d in designs]),
                        flat_id=np.concatenate([d.flat_id for d in designs]))


def training_starts(cutoff: float, window_days: float, kde_cfg: KdeConfig,
                    history_start: float, max_periods: int | None = None) -> list[float]:
    starts = []
    k = 1
    while True:
        s = cutoff - k * window_days
        if s - kde_cfg.span_days < history_start:
            break
        starts.append(s)
        if max_periods is not None and len(starts) >= max_periods:
            break
        k += 1
    if not starts:
        raise InsufficientHistoryError(
            f"no training period with {kde_cfg.n_lags} x {kde_cfg.window_days}-day lags fits between "
            f"history start {history_start:g} and cutoff {cutoff:g}",
            history_start + kde_cfg.span_days + window_days,
        )
    return starts


def build_training_design(events, ctx: GridContext, hp: HyperParams, cutoff: float,
                          window_days: float, history_start: float,
                          freqs: FrequencyMatrix | None, options: PipelineOptions) -> DesignMatrix:
    ev = as_event_set(events)
    starts = training_starts(cutoff, window_days, hp.kde_config, history_start,
                             options.max_train_periods)
    return stack([period_rows(ev, ctx, s, window_days, hp.kde_config, freqs, options)
                  for s in starts])


def fit_model(hp: HyperParams, events, region: StudyRegion, cutoff: float, window_days: float,
              history_start: float | None = None, options: PipelineOptions | None = None,
              ctx: GridContext | None = None) -> FittedModel:
    """Fit on events up to ``cutoff``; later events are never read."""
    options = options or PipelineOptions()
    hp.validate(options.allow_out_of_bounds)
    ev = as_event_set(events).floored()
    ev = ev.select(ev.t <= cutoff)
    if history_start is None:
        if not len(ev):
            raise InsufficientHistoryError("no events before the cutoff", cutoff)
        history_start = float(ev.t.min())
    ctx = ctx or GridContext.build(region, hp, options)
    freqs = sample_frequencies(hp.rff_config) if hp.d > 0 else None
    design = build_training_design(ev, ctx, hp, cutoff, window_days, history_start, freqs, options)
    opt = OptimizerConfig(**{**options.optimizer.__dict__, "fit_intercept": options.fit_intercept})
    params, report = fit(design, hp.a, hp.b, opt)
    n_periods = design.n // max(len(ctx.flat_ids), 1)
    return FittedModel(hp, ctx, params, report, freqs, cutoff, window_days, history_start, n_periods)


def forecast_at(model: FittedModel, events, cutoff: float | None = None,
                options: PipelineOptions | None = None) -> Forecast:
    """Predict ``(cutoff, cutoff + W]`` with a fitted model, reading events ``<= cutoff``.

    ``cutoff`` defaults to the model's training cutoff; later cutoffs give
    rolling forecasts without refitting.
    """
    options = options or PipelineOptions()
    cutoff = model.cutoff if cutoff is None else cutoff
    ev = as_event_set(events).floored()
    ev = ev.select(ev.t <= cutoff)
    if cutoff - model.hp.kde_config.span_days < model.history_start:
        raise InsufficientHistoryError("forecast lags reach before the history start",
                                       model.history_start + model.hp.kde_config.span_days)
    rows = period_rows(ev, model.ctx, cutoff, model.window_days, model.hp.kde_config,
                       model.freqs, options, with_counts=False)
    lam = predict(model.params, rows)
    intens = np.full(model.ctx.grid.n_cells, np.nan)
    intens[model.ctx.flat_ids] = lam
    sel = select_hotspots(np.nan_to_num(intens, nan=-np.inf), model.ctx.grid,
                          model.hp.coverage_param, active=model.ctx.active,
                          allow_out_of_bounds=options.allow_out_of_bounds)
    return Forecast(cutoff, model.window_days, intens, sel, rows)


def window_counts(events, grid: GridSpec, start: float, window_days: float) -> np.ndarray:
    """Per-flat-id counts of events in ``(start, start + W]``."""
    ev = as_event_set(events).floored()
    m = (ev.t > start) & (ev.t <= start + window_days)
    cells = points_to_cells(grid, ev.x[m], ev.y[m], strict=False)
    return np.bincount(cells[cells >= 0], minlength=grid.n_cells)


def score_forecast(fc: Forecast, model: FittedModel, events,
                   options: PipelineOptions | None = None) -> ScoreReport:
    options = options or PipelineOptions()
    counts = window_counts(events, model.ctx.grid, fc.cutoff, fc.window_days)
    counts = np.where(model.ctx.active, counts, 0)
    area = options.region_area_sqft or model.ctx.region.total_area_sqft
    return score(fc.selection, counts, model.ctx.grid, area, active=model.ctx.active)


def rolling_forecast(hp: HyperParams, events, region: StudyRegion, cutoff: float,
                     window_days: float, n_windows: int, history_start: float | None = None,
                     options: PipelineOptions | None = None):
    """Fit once at ``cutoff`` then score ``n_windows`` consecutive windows without refitting.

    Returns (model, [(Forecast, ScoreReport), ...]).
    """
    options = options or PipelineOptions()
    ev = as_event_set(events).floored()
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    end = cutoff + n_windows * window_days
    if not len(ev) or ev.t.max() < end - window_days:
        raise ValueError(f"events end at {ev.t.max() if len(ev) else None}; "
                         f"{n_windows} windows need data through {end:g}")
    model = fit_model(hp, ev, region, cutoff, window_days, history_start, options)
    out = []
    for w in range(n_windows):
        c = cutoff + w * window_days
        fc = forecast_at(model, ev, c, options)
        out.append((fc, score_forecast(fc, model, ev, options)))
    return model, out
