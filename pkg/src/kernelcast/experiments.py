"""Ablations, a Poisson bootstrap envelope for rolling scores, and synthetic scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HyperParams
from .forecast import GridContext, PipelineOptions
from .geometry import StudyRegion
from .metrics import Selection, score
from .rff import RffConfig, sample_frequencies
from .search import CvPlan, SearchResult, evaluate_candidate
from .synth import GaussianBump, RffField, SynthSpec

ABLATIONS = ("full", "kde_baseline", "no_rff", "no_rotation", "fixed_600_cells")


@dataclass(frozen=True)
class KdeBaseline:
    """Single-lag KDE baseline. The defaults (200 m bandwidth, two-month
    window) are a configurable convention, not tuned values."""

    bandwidth_ft: float = 656.0
    window_days: float = 60.0


def ablation_variant(hp: HyperParams, name: str, baseline: KdeBaseline = KdeBaseline()) -> HyperParams:
    if name == "full":
        return hp
    if name == "kde_baseline":
        return hp.replace(d=0, kde_lags=1, kde_bandwidth_ft=baseline.bandwidth_ft,
                          kde_window_days=baseline.window_days, a=0.0, b=0.0)
    if name == "no_rff":
        return hp.replace(d=0)
    if name == "no_rotation":
        return hp.replace(rotation_rad=0.0)
    if name == "fixed_600_cells":
        return hp.replace(cell_w_ft=600.0, cell_h_ft=600.0)
    raise ValueError(f"unknown ablation {name!r}; choose from {ABLATIONS}")


def run_ablation(hp: HyperParams, events, plan: CvPlan, region: StudyRegion,
                 options: PipelineOptions | None = None, variants=ABLATIONS,
                 baseline: KdeBaseline = KdeBaseline()) -> dict[str, SearchResult]:
    """Score every variant on the same folds."""
    return {name: evaluate_candidate(ablation_variant(hp, name, baseline), events, plan, region,
                                     options, provenance=f"ablation:{name}")
            for name in variants}


def ablation_rows(results: dict[str, SearchResult]) -> list[dict]:
    return [{"variant": k, "mean_pei": r.mean_pei, "fold_peis": list(r.fold_peis),
             "feasible": r.feasible, "message": r.message} for k, r in results.items()]


# -- rolling-score noise envelope -------------------------------------------

def expected_cell_counts(intensity, ctx: GridContext, start: float, window_days: float,
                         n_sub: int = 4, n_t: int = 4) -> np.ndarray:
    """Integrate ``intensity(x, y, t)`` over each grid cell and ``(start, start + W]``.

    Midpoint rule on an ``n_sub x n_sub`` lattice per cell and ``n_t``
    time slices. Inactive cells get 0.
    """
    g = ctx.grid
    out = np.zeros(g.n_cells)
    uu = (np.arange(n_sub) + 0.5) / n_sub
    ts = start + (np.arange(n_t) + 0.5) / n_t * window_days
    cols = ctx.flat_ids % g.n_cols
    rows = ctx.flat_ids // g.n_cols
    for fu in uu:
        for fv in uu:
            x, y = g.to_world((cols + fu) * g.cell_w_ft, (rows + fv) * g.cell_h_ft)
            for t in ts:
                out[ctx.flat_ids] += intensity(x, y, np.full(x.shape, t))
    return out * g.cell_area_sqft * window_days / (n_sub * n_sub * n_t)


def bootstrap_pei_envelope(selections: list[Selection], expected: list[np.ndarray],
                           n_boot: int = 500, seed: int = 0, level: float = 0.95,
                           active=None) -> dict:
    """Distribution of the across-window PEI variance under Poisson resampling.

    Each replicate redraws every window's cell counts from ``expected`` and
    rescores the fixed selections.
    """
    rng = np.random.default_rng(seed)
    variances = np.empty(n_boot)
    for b in range(n_boot):
        peis = []
        for sel, mu in zip(selections, expected):
            counts = rng.poisson(mu)
            peis.append(score(sel, counts, region_area_sqft=1.0, active=active).pei)
        variances[b] = np.var(peis, ddof=1)
    lo, hi = np.quantile(variances, [(1 - level) / 2, (1 + level) / 2])
    return {"low": float(lo), "high": float(hi), "variances": variances}


# -- synthetic scenarios ------------------------------------------------------

def hawkes_scenario(seed: int, region: StudyRegion | None = None, horizon_days: float = 3 * 365,
                    branching_ratio: float = 0.5, n_bumps: int = 8) -> SynthSpec:
    """Self-exciting events on top of a few static Gaussian hotspots."""
    region = region or StudyRegion(0.0, 0.0, 8000.0, 8000.0)
    rng = np.random.default_rng(seed)
    bumps = tuple(
        GaussianBump(rng.uniform(0.05, 0.2),
                     rng.uniform(region.min_x + 1000, region.max_x - 1000),
                     rng.uniform(region.min_y + 1000, region.max_y - 1000),
                     rng.uniform(150, 600))
        for _ in range(n_bumps))
    return SynthSpec(region, horizon_days, bumps,
                     constant_rate=0.1 / (region.width * region.height),
                     branching_ratio=branching_ratio, trigger_scale_ft=150.0,
                     trigger_time_days=10.0, seed=seed)


def rff_scenario(seed: int, hp: HyperParams, region: StudyRegion | None = None,
                 horizon_days: float = 3 * 365, events_per_day: float = 3.0,
                 coef_scale: float = 2.0) -> SynthSpec:
    """Poisson data whose log-intensity lies in the span of ``hp``'s random features.

    The frequencies are exactly the ones ``hp.rff_config`` samples, with the
    same coordinate offset as the pipeline, so the truth is representable.
    """
    region = region or StudyRegion(0.0, 0.0, 8000.0, 8000.0)
    cfg: RffConfig = hp.rff_config
    if cfg is None:
        raise ValueError("rff_scenario needs d > 0")
    freqs = sample_frequencies(cfg)
    rng = np.random.default_rng(seed)
    beta = rng.normal(0.0, coef_scale, size=2 * cfg.d)
    field = RffField(freqs.omegas, beta, 1.0, (region.min_x, region.min_y, 0.0))
    # rescale so the expected daily total is ``events_per_day``
    m = 64
    gx, gy = np.meshgrid(np.linspace(region.min_x, region.max_x, m),
                         np.linspace(region.min_y, region.max_y, m))
    ts = np.linspace(0.0, horizon_days, 16)
    mean_val = np.mean([field(gx.ravel(), gy.ravel(), np.full(m * m, t)).mean() for t in ts])
    scale = events_per_day / (mean_val * region.width * region.height)
    field = RffField(freqs.omegas, beta, float(scale), field.offset)
    return SynthSpec(region, horizon_days, rff_field=field, seed=seed)
