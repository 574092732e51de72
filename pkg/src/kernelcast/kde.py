"""Lagged spatial Gaussian kernel sums used as autoregressive covariates.

Lag ``j`` at query time ``t`` sums an unnormalised Gaussian kernel over the
events with ``t - j*D < t_i <= t - (j-1)*D``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .events import EventSet, as_event_set
from .geometry import GridSpec, cell_centroids

# beyond this many bandwidths a term contributes less than exp(-18)
TRUNCATION_BANDWIDTHS = 6.0
_CHUNK = 4_000_000  # kernel-matrix entries per block


class InsufficientHistoryError(ValueError):
    def __init__(self, message: str, earliest_forecast_time: float):
        super().__init__(message)
        self.earliest_forecast_time = earliest_forecast_time


@dataclass(frozen=True)
class KdeConfig:
    bandwidth_ft: float
    n_lags: int
    window_days: float

    def __post_init__(self):
        if self.bandwidth_ft <= 0 or self.window_days <= 0 or self.n_lags < 1:
            raise ValueError(f"invalid KDE config {self}")

    @property
    def span_days(self) -> float:
        return self.n_lags * self.window_days


def gaussian_kernel(dist2, bandwidth_ft: float):
    return np.exp(-np.asarray(dist2) / (2.0 * bandwidth_ft ** 2))


def kde_lag(events, query_x: float, query_y: float, query_t: float,
            lag_j: int, config: KdeConfig) -> float:
    """Kernel sum at one space-time point for a single lag."""
    if not 1 <= lag_j <= config.n_lags:
        raise ValueError(f"lag {lag_j} outside 1..{config.n_lags}")
    ev = as_event_set(events)
    hi = query_t - (lag_j - 1) * config.window_days
    lo = query_t - lag_j * config.window_days
    m = (ev.t > lo) & (ev.t <= hi)
    d2 = (ev.x[m] - query_x) ** 2 + (ev.y[m] - query_y) ** 2
    return float(gaussian_kernel(d2, config.bandwidth_ft).sum())


def lag_index(t, query_t: float, config: KdeConfig) -> np.ndarray:
    """0-based lag index of each event time relative to ``query_t``; -1 if outside all lags."""
    t = np.asarray(t, dtype=float)
    lag = np.full(t.shape, -1, dtype=np.int64)
    for j in range(config.n_lags):
        hi = query_t - j * config.window_days
        lo = query_t - (j + 1) * config.window_days
        lag[(t > lo) & (t <= hi)] = j
    return lag


def kde_at_points(events, qx, qy, query_t: float, config: KdeConfig,
                  truncate: bool = False) -> np.ndarray:
    """(n_points, n_lags) matrix of lag sums at arbitrary query locations."""
    ev = as_event_set(events)
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    out = np.zeros((len(qx), config.n_lags))
    lag = lag_index(ev.t, query_t, config)
    use = lag >= 0
    if not use.any():
        return out
    ex, ey, lag = ev.x[use], ev.y[use], lag[use]
    if truncate:
        return _kde_truncated(ex, ey, lag, qx, qy, config, out)
    step = max(1, _CHUNK // max(len(qx), 1))
    for start in range(0, len(ex), step):
        sl = slice(start, start + step)
        d2 = (qx[:, None] - ex[None, sl]) ** 2 + (qy[:, None] - ey[None, sl]) ** 2
        k = gaussian_kernel(d2, config.bandwidth_ft)
        onehot = np.zeros((k.shape[1], config.n_lags))
        onehot[np.arange(k.shape[1]), lag[sl]] = 1.0
        out += k @ onehot
    return out


def _kde_truncated(ex, ey, lag, qx, qy, config, out):
    from scipy.spatial import cKDTree

    radius = TRUNCATION_BANDWIDTHS * config.bandwidth_ft
    qtree = cKDTree(np.column_stack([qx, qy]))
    etree = cKDTree(np.column_stack([ex, ey]))
    sdm = qtree.sparse_distance_matrix(etree, radius, output_type="coo_matrix")
    vals = gaussian_kernel(sdm.data ** 2, config.bandwidth_ft)
    np.add.at(out, (sdm.row, lag[sdm.col]), vals)
    return out


def kde_feature_block(events, grid: GridSpec, forecast_period_start_t: float,
                      config: KdeConfig, history_start: float | None = None,
                      truncate: bool = False, centroids: np.ndarray | None = None) -> np.ndarray:
    """(n_cells, n_lags) lag sums at every cell centroid.

    ``history_start`` is the earliest time covered by data; the lags may
    not reach before it. When omitted, the earliest event time is used.
    """
    ev = as_event_set(events)
    if history_start is None and len(ev):
        history_start = float(ev.t.min())
    if history_start is not None:
        need = forecast_period_start_t - config.span_days
        if need < history_start:
            earliest = history_start + config.span_days
            raise InsufficientHistoryError(
                f"{config.n_lags} lags of {config.window_days} days need history back to "
                f"{need:g}; data start at {history_start:g}; earliest usable forecast time is {earliest:g}",
                earliest,
            )
    if centroids is None:
        centroids = cell_centroids(grid)
    return kde_at_points(ev, centroids[:, 0], centroids[:, 1], forecast_period_start_t,
                         config, truncate=truncate)


def hawkes_self_excitation(events, x: float, y: float, t: float, window_days: float,
                           bandwidth_ft: float) -> float:
    """Self-exciting term of a linear Hawkes intensity with a boxcar time kernel.

    Written as an explicit loop over the history so it stays independent of
    :func:`kde_at_points`.
    """
    ev = as_event_set(events)
    total = 0.0
    for ti, xi, yi in zip(ev.t, ev.x, ev.y):
        k_t = 1.0 if t - window_days < ti <= t else 0.0
        if k_t:
            total += k_t * np.exp(-((xi - x) ** 2 + (yi - y) ** 2) / (2.0 * bandwidth_ft ** 2))
    return float(total)


def hawkes_equivalence_check(events, grid: GridSpec, t: float, config: KdeConfig,
                             rtol: float = 1e-12) -> bool:
    """True iff lag-1 kernel sums equal the boxcar Hawkes excitation at every centroid."""
    cent = cell_centroids(grid)
    kde1 = kde_at_points(events, cent[:, 0], cent[:, 1], t, config)[:, 0]
    hawkes = np.array([hawkes_self_excitation(events, cx, cy, t, config.window_days, config.bandwidth_ft)
                       for cx, cy in cent])
    scale = np.maximum(np.abs(hawkes), np.finfo(float).tiny)
    rel = np.where(hawkes == kde1, 0.0, np.abs(kde1 - hawkes) / scale)
    return bool(np.all(rel <= rtol))


def write_feature_block_csv(path, block: np.ndarray, flat_ids=None) -> None:
    n, p = block.shape
    flat_ids = np.arange(n) if flat_ids is None else flat_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["flat_id"] + [f"lag_{j + 1}" for j in range(p)])
        for fid, row in zip(flat_ids, block):
            w.writerow([int(fid)] + [repr(float(v)) for v in row])
