"""Crossvalidation over yearly held-out periods and hyperparameter search.

Candidates are scored by mean held-out PEI. Two searchers are provided, an
exhaustive grid and a sequential Bayesian optimiser (Matern-5/2 GP
surrogate with expected improvement); their populations can be merged.
"""
from __future__ import annotations

import csv
import datetime as dt
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .config import INT_FIELDS, HyperParams, coerce_fields
from .events import as_event_set
from .forecast import (GridContext, PipelineOptions, fit_model, forecast_at, score_forecast)
from .geometry import GridConstraintError, StudyRegion
from .glm import NumericalError
from .kde import InsufficientHistoryError
from .metrics import SelectionError

log = logging.getLogger(__name__)

CATEGORICAL_FIELDS = ("kernel_family",)


@dataclass(frozen=True)
class Fold:
    year: int
    cutoff: float  # last day of training history

    def validation(self, window_days: float) -> tuple[float, float]:
        """Validation period ``(cutoff, cutoff + W]``."""
        return self.cutoff, self.cutoff + window_days


@dataclass(frozen=True)
class CvPlan:
    folds: tuple[Fold, ...]
    forecast_horizon_days: float
    history_start: float

    def training_mask(self, fold: Fold, t) -> np.ndarray:
        return np.asarray(t) <= fold.cutoff


@dataclass
class SearchResult:
    hp: HyperParams
    fold_peis: list[float]
    mean_pei: float
    provenance: str = "grid"
    feasible: bool = True
    message: str = ""
    z_score: float | None = None

    def to_row(self) -> dict:
        row = self.hp.to_dict()
        row.update({
            "fold_peis": json.dumps([round(p, 12) for p in self.fold_peis]),
            "mean_pei": self.mean_pei,
            "provenance": self.provenance,
            "feasible": int(self.feasible),
            "z_score": "" if self.z_score is None else self.z_score,
            "message": self.message,
        })
        return row


def build_cv_plan(dataset_span: tuple[float, float], forecast_window_days: float,
                  forecast_start_dayofyear: int, epoch: dt.date = dt.date(2000, 1, 1),
                  min_history_days: float = 0.0) -> CvPlan:
    """One fold per year whose aligned forecast window fits inside the data.

    ``dataset_span`` is (first day, last day) in days since ``epoch``. The
    fold for year Y validates on the ``W`` days starting at day-of-year
    ``forecast_start_dayofyear`` of Y and trains on everything before it.
    Folds with less than ``min_history_days`` of training history are
    skipped.
    """
    start, end = dataset_span
    if forecast_window_days > 365:
        raise ValueError("forecast window longer than a year")
    if end - start + 1 < 2 * 365:
        raise ValueError("dataset span must cover at least two years")
    y0 = (epoch + dt.timedelta(days=int(math.floor(start)))).year
    y1 = (epoch + dt.timedelta(days=int(math.floor(end)))).year
    folds = []
    for year in range(y0, y1 + 1):
        first_day = dt.date(year, 1, 1) + dt.timedelta(days=forecast_start_dayofyear - 1)
        cutoff = float((first_day - epoch).days - 1)
        if cutoff >= start + min_history_days and cutoff + forecast_window_days <= end:
            folds.append(Fold(year, cutoff))
    return CvPlan(tuple(folds), float(forecast_window_days), float(start))


def evaluate_candidate(hp: HyperParams, events, plan: CvPlan, region: StudyRegion,
                       options: PipelineOptions | None = None, provenance: str = "grid") -> SearchResult:
    """Fit and score ``hp`` on every fold; infeasible candidates score 0."""
    options = options or PipelineOptions()
    ev = as_event_set(events).floored()
    peis: list[float] = []
    try:
        hp.validate(options.allow_out_of_bounds)
        ctx = GridContext.build(region, hp, options)
        for fold in plan.folds:
            train = ev.select(plan.training_mask(fold, ev.t))
            model = fit_model(hp, train, region, fold.cutoff, plan.forecast_horizon_days,
                              plan.history_start, options, ctx=ctx)
            fc = forecast_at(model, train, options=options)
            lo, hi = fold.validation(plan.forecast_horizon_days)
            truth = ev.select((ev.t > lo) & (ev.t <= hi))
            peis.append(score_forecast(fc, model, truth, options).pei)
    except (InsufficientHistoryError, GridConstraintError, SelectionError, NumericalError, ValueError) as exc:
        return SearchResult(hp, [0.0] * len(plan.folds), 0.0, provenance, False, str(exc))
    mean = float(np.mean(peis)) if peis else 0.0
    return SearchResult(hp, peis, mean, provenance)


def _rank_key(item):
    idx, r = item
    return (-r.mean_pei, r.hp.n_features, math.hypot(r.hp.a, r.hp.b), idx)


def _spread(peis: np.ndarray) -> float:
    """Sample sd, or 0 when it is rounding noise on equal values."""
    if len(peis) < 2:
        return 0.0
    sd = float(peis.std(ddof=1))
    return sd if sd > 1e-12 * max(1.0, float(np.abs(peis).max())) else 0.0


def rank_results(results: list[SearchResult]) -> list[SearchResult]:
    """Sort by mean PEI (desc), then fewer features, then smaller penalties; attach z-scores."""
    ranked = [r for _, r in sorted(enumerate(results), key=_rank_key)]
    peis = np.array([r.mean_pei for r in ranked])
    sd = _spread(peis)
    for r in ranked:
        r.z_score = float((r.mean_pei - peis.mean()) / sd) if sd > 0 else None
    return ranked


def expand_grid(space: dict, base: HyperParams | None = None) -> list[HyperParams]:
    """Cartesian product of a ``{field: [values]}`` space layered over ``base``."""
    if not space:
        raise ValueError("empty search space")
    keys = list(space)
    values = [list(space[k]) for k in keys]
    if any(len(v) == 0 for v in values):
        raise ValueError("empty search space")
    out = []
    for combo in itertools.product(*values):
        d = base.to_dict() if base is not None else {}
        d.update(coerce_fields(dict(zip(keys, combo))))
        out.append(HyperParams.from_dict(d))
    return out


def _evaluate_packed(args):
    return evaluate_candidate(*args)


def grid_search(space: dict, events, plan: CvPlan, region: StudyRegion,
                base: HyperParams | None = None, parallelism: int = 1,
                options: PipelineOptions | None = None) -> list[SearchResult]:
    candidates = expand_grid(space, base)
    ev = as_event_set(events)
    jobs = [(hp, ev, plan, region, options, "grid") for hp in candidates]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_evaluate_packed, jobs))
    else:
        results = [_evaluate_packed(j) for j in jobs]
    return rank_results(results)


# -- Bayesian optimisation -------------------------------------------------

@dataclass
class BoTrace:
    X: np.ndarray          # unit-cube inputs, (n, k)
    y: np.ndarray          # objective values
    kind: list = field(default_factory=list)  # "init" or "ei" per evaluation


def _fit_surrogate(X, y, seed):
    from sklearn.gaussian_process import GaussianProcessRegressor
    from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

    kernel = (ConstantKernel(1.0, (1e-3, 1e3))
              * Matern(length_scale=np.full(X.shape[1], 0.3), length_scale_bounds=(1e-2, 1e1), nu=2.5)
              + WhiteKernel(1e-6, (1e-10, 1e-1)))
    gp = GaussianProcessRegressor(kernel, normalize_y=True, n_restarts_optimizer=2,
                                  random_state=seed)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gp.fit(X, y)
    return gp


def expected_improvement(mu, sigma, best, xi=0.0):
    sigma = np.maximum(sigma, 1e-12)
    z = (mu - best - xi) / sigma
    return (mu - best - xi) * norm.cdf(z) + sigma * norm.pdf(z)


def maximize(objective, n_dims: int, n_init: int, n_iter: int, seed: int = 0,
             n_starts: int = 8, n_candidates: int = 2048) -> BoTrace:
    """Sequential BO of ``objective`` over the unit cube ``[0, 1]^n_dims``."""
    if n_dims < 1 or n_init < 1:
        raise ValueError("need at least one dimension and one initial point")
    rng = np.random.default_rng(seed)
    init = qmc.Halton(d=n_dims, scramble=True, seed=seed).random(n_init)
    X = [x for x in init]
    y = [float(objective(x)) for x in init]
    kind = ["init"] * n_init
    for it in range(n_iter):
        Xa, ya = np.array(X), np.array(y)
        gp = _fit_surrogate(Xa, ya, (seed + it) % 2**32)
        best = ya.max()

        def neg_ei(x):
            mu, sd = gp.predict(x.reshape(1, -1), return_std=True)
            return -float(expected_improvement(mu, sd, best)[0])

        cand = rng.uniform(size=(n_candidates, n_dims))
        mu, sd = gp.predict(cand, return_std=True)
        ei = expected_improvement(mu, sd, best)
        starts = list(cand[np.argsort(-ei)[:n_starts - 1]]) + [Xa[np.argmax(ya)]]
        best_x, best_val = None, np.inf
        for x0 in starts:
            res = minimize(neg_ei, x0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * n_dims)
            if res.fun < best_val:
                best_x, best_val = np.clip(res.x, 0.0, 1.0), res.fun
        X.append(best_x)
        y.append(float(objective(best_x)))
        kind.append("ei")
    return BoTrace(np.array(X), np.array(y), kind)


def _decode(u: np.ndarray, keys: list[str], bounds: dict, base: HyperParams) -> HyperParams:
    vals = {}
    for k, ui in zip(keys, u):
        lo, hi = bounds[k]
        v = lo + float(ui) * (hi - lo)
        vals[k] = int(round(v)) if k in INT_FIELDS else v
    return replace(base, **vals)


def bayes_opt(bounds: dict, events, plan: CvPlan, region: StudyRegion, base: HyperParams,
              n_init: int = 10, n_iter: int = 20, bo_seed: int = 0,
              options: PipelineOptions | None = None) -> list[SearchResult]:
    """BO over box ``bounds`` ({field: (lo, hi)}); other fields come from ``base``."""
    keys = [k for k in bounds]
    bad = [k for k in keys if k in CATEGORICAL_FIELDS or k not in {f.name for f in fields(HyperParams)}]
    if bad:
        raise ValueError(f"cannot optimise fields {bad} continuously")
    for k in keys:
        lo, hi = bounds[k]
        if not hi > lo:
            raise ValueError(f"degenerate bounds for {k}: {bounds[k]}")
    ev = as_event_set(events)
    results: list[SearchResult] = []

    def obj(u):
        res = evaluate_candidate(_decode(u, keys, bounds, base), ev, plan, region, options,
                                 provenance="bo")
        results.append(res)
        return res.mean_pei

    maximize(obj, len(keys), n_init, n_iter, bo_seed)
    return rank_results(results)


def merge_results(*populations: list[SearchResult]) -> list[SearchResult]:
    """Union of several searched populations, re-ranked together."""
    return rank_results([r for pop in populations for r in pop])


def pei_distribution_report(results: list[SearchResult]) -> dict:
    if len(results) < 2:
        raise ValueError("need at least two results")
    peis = np.array([r.mean_pei for r in results])
    sd = _spread(peis)
    z = float((peis.max() - peis.mean()) / sd) if sd > 0 else None
    return {
        "fraction_zero_pei": float(np.mean(peis == 0.0)),
        "max_pei": float(peis.max()),
        "z_score_of_max": z,
        "z_score_defined": z is not None,
    }


def write_results_csv(path, results: list[SearchResult]) -> None:
    if not results:
        raise ValueError("no results to write")
    rows = [r.to_row() for r in results]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
