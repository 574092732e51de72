"""
Crossvalidated grid search and Bayesian optimisation
====================================================

Score candidates on yearly held-out weeks, then merge a small grid with a
short Bayesian optimisation run.
"""
import datetime as dt

from kernelcast.config import HyperParams
from kernelcast.experiments import hawkes_scenario
from kernelcast.forecast import PipelineOptions
from kernelcast.geometry import StudyRegion
from kernelcast.search import (bayes_opt, build_cv_plan, grid_search, merge_results,
                               pei_distribution_report)
from kernelcast.synth import simulate_hawkes

region = StudyRegion(0.0, 0.0, 8000.0, 8000.0)
events = simulate_hawkes(hawkes_scenario(seed=8, region=region, horizon_days=1500))
plan = build_cv_plan((0.0, 1500.0), 7.0, forecast_start_dayofyear=60, epoch=dt.date(2012, 1, 1),
                     min_history_days=180)
print("folds:", [(f.year, f.cutoff) for f in plan.folds])

base = HyperParams(250, 250, 0.3, 900, 60, 0.0, 8, 0.0, 1e-3, 250, 3, 10)
options = PipelineOptions(max_train_periods=10)
grid = grid_search({"kde_lags": [1, 3], "kde_bandwidth_ft": [150, 600]}, events, plan, region,
                   base, options=options)
bo = bayes_opt({"kde_bandwidth_ft": (150.0, 700.0), "kde_window_days": (5.0, 30.0)},
               events, plan, region, base, n_init=4, n_iter=4, bo_seed=1, options=options)

merged = merge_results(grid, bo)
for r in merged[:5]:
    print(f"{r.provenance:4s} PEI {r.mean_pei:.3f}  lags {r.hp.kde_lags}  "
          f"bw {r.hp.kde_bandwidth_ft:.0f}  window {r.hp.kde_window_days:.1f}")
print(pei_distribution_report(merged))
