"""
Lagged KDE features and self-excitation
=======================================

Each lag counts kernel-weighted events in one past window. With a single
lag the feature is exactly a Hawkes self-excitation sum with a boxcar
temporal trigger.
"""
import numpy as np

from kernelcast.experiments import hawkes_scenario
from kernelcast.geometry import build_grid
from kernelcast.kde import KdeConfig, hawkes_equivalence_check, kde_feature_block
from kernelcast.synth import simulate_hawkes

spec = hawkes_scenario(seed=1, horizon_days=200)
events = simulate_hawkes(spec)
grid = build_grid(spec.region, 250.0, 250.0, 0.0)
print(f"{len(events)} synthetic events")

# six 10-day lags at 250 ft bandwidth, evaluated at day 150
cfg = KdeConfig(bandwidth_ft=250.0, n_lags=6, window_days=10.0)
past = events.select(events.t <= 150.0)
block = kde_feature_block(past, grid, 150.0, cfg)
print("feature block", block.shape, "mean per lag", np.round(block.mean(axis=0), 3))

# a single lag is a self-excitation sum with a boxcar trigger
one_lag = KdeConfig(250.0, 1, 10.0)
print("lag-1 equals the boxcar Hawkes sum:", hawkes_equivalence_check(past, grid, 150.0, one_lag))
