"""
Hotspot selection and scoring
=============================

Select the highest-intensity cells under an area budget, then score the
selection by hit rate, PAI and PEI against observed counts.
"""
import numpy as np

from kernelcast.geometry import StudyRegion, build_grid
from kernelcast.metrics import cells_for_coverage, score, select_hotspots

region = StudyRegion(0.0, 0.0, 8000.0, 8000.0)
grid = build_grid(region, 250.0, 250.0, 0.0)

# the budget is interpolated between the minimum and maximum total area
for cov in (0.0, 0.5, 1.0):
    print(f"coverage {cov:.1f} -> {cells_for_coverage(grid.cell_area_sqft, cov)} cells")

rng = np.random.default_rng(2)
truth_rate = rng.gamma(0.3, 1.0, grid.n_cells)
forecast = truth_rate * rng.lognormal(0.0, 0.5, grid.n_cells)
observed = rng.poisson(truth_rate)

sel = select_hotspots(forecast, grid, coverage_param=0.5)
rep = score(sel, observed, grid, region.total_area_sqft)
print(f"hit rate {rep.hit_rate:.3f}  PAI {rep.pai:.2f}  PEI {rep.pei:.3f}  (n={rep.n}, n*={rep.n_star})")
