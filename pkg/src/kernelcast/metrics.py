"""Hotspot selection under an area budget, and hit rate / PAI / PEI scoring."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import SQFT_PER_SQMI, GridSpec, cell_polygon, polygon_wkt

MIN_AREA_SQFT = 0.25 * SQFT_PER_SQMI
MAX_AREA_SQFT = 0.75 * SQFT_PER_SQMI


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class Selection:
    chosen: tuple[int, ...]
    total_area_sqft: float
    coverage_param: float | None = None

    @property
    def k(self) -> int:
        return len(self.chosen)


@dataclass(frozen=True)
class ScoreReport:
    n: int
    n_star: int
    T: int
    hit_rate: float
    pai: float
    pei: float
    a_sqft: float
    A_sqft: float
    selected: tuple[int, ...]
    pei_vacuous: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selected"] = list(self.selected)
        return d


def cells_for_coverage(cell_area_sqft: float, coverage_param: float) -> int:
    """Number of equal cells for a coverage position between 0.25 and 0.75 sq mi."""
    if not 0.0 <= coverage_param <= 1.0:
        raise SelectionError(f"coverage_param {coverage_param} outside [0, 1]")
    target = MIN_AREA_SQFT + coverage_param * (MAX_AREA_SQFT - MIN_AREA_SQFT)
    k = math.floor(target / cell_area_sqft)
    if k * cell_area_sqft < MIN_AREA_SQFT:
        k = math.ceil(MIN_AREA_SQFT / cell_area_sqft)
    return k


def top_k(values, k: int, active=None) -> np.ndarray:
    """Flat ids of the ``k`` largest values; ties go to the smaller flat id."""
    values = np.asarray(values, dtype=float)
    ids = np.arange(values.size) if active is None else np.flatnonzero(active)
    if k > ids.size:
        raise SelectionError(f"need {k} cells but only {ids.size} are active")
    order = np.lexsort((ids, -values[ids]))
    return np.sort(ids[order[:k]])


def select_hotspots(intensities, grid: GridSpec, coverage_param: float, active=None,
                    k: int | None = None, allow_out_of_bounds: bool = False) -> Selection:
    """Pick the highest-intensity active cells filling the coverage budget.

    ``intensities`` is indexed by flat id. Passing ``k`` bypasses the
    area budget and requires ``allow_out_of_bounds``.
    """
    intensities = np.asarray(intensities, dtype=float)
    if intensities.size != grid.n_cells:
        raise SelectionError(f"{intensities.size} intensities for {grid.n_cells} cells")
    if k is None:
        k = cells_for_coverage(grid.cell_area_sqft, coverage_param)
    chosen = top_k(intensities, k, active)
    area = k * grid.cell_area_sqft
    if not allow_out_of_bounds and not MIN_AREA_SQFT <= area <= MAX_AREA_SQFT:
        raise SelectionError(f"selected area {area:,.0f} sq ft outside competition bounds")
    return Selection(tuple(int(c) for c in chosen), float(area), coverage_param)


def oracle_score(k: int, actual_counts, active=None, exhaustive_limit: int = 20) -> int:
    """Largest count total any ``k`` cells could capture.

    Enumerates every k-subset for small inputs and checks it against the
    top-k sum.
    """
    counts = np.asarray(actual_counts)
    vals = counts if active is None else counts[np.asarray(active, dtype=bool)]
    top = int(np.sort(vals)[::-1][:k].sum())
    if vals.size <= exhaustive_limit:
        best = max((int(sum(c)) for c in itertools.combinations(vals.tolist(), k)), default=0)
        if best != top:
            raise AssertionError(f"exhaustive n*={best} disagrees with top-k sum {top}")
    return top


def score(selection: Selection, actual_counts, grid: GridSpec | None = None,
          region_area_sqft: float | None = None, active=None) -> ScoreReport:
    counts = np.asarray(actual_counts)
    if grid is not None and counts.size != grid.n_cells:
        raise SelectionError(f"{counts.size} counts for {grid.n_cells} cells")
    chosen = np.asarray(selection.chosen, dtype=np.int64)
    if chosen.size and (chosen.min() < 0 or chosen.max() >= counts.size):
        raise SelectionError("selection refers to cells outside the count vector")
    if active is not None and chosen.size and not np.asarray(active, dtype=bool)[chosen].all():
        raise SelectionError("selection contains inactive cells")
    n = int(counts[chosen].sum())
    T = int(counts.sum() if active is None else counts[np.asarray(active, dtype=bool)].sum())
    n_star = oracle_score(selection.k, counts, active, exhaustive_limit=0)
    if region_area_sqft is None:
        if grid is None:
            raise SelectionError("need a grid or region_area_sqft")
        region_area_sqft = grid.n_cells * grid.cell_area_sqft
    hit = n / T if T else 0.0
    frac = selection.total_area_sqft / region_area_sqft
    pai = hit / frac if frac > 0 else 0.0
    vacuous = n_star == 0
    pei = 1.0 if vacuous else n / n_star
    return ScoreReport(n, n_star, T, hit, pai, pei, selection.total_area_sqft,
                       float(region_area_sqft), tuple(selection.chosen), vacuous)


def write_selection_csv(path, selection: Selection, grid: GridSpec) -> None:
    chosen = set(selection.chosen)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["flat_id", "selected"])
        for fid in range(grid.n_cells):
            w.writerow([fid, int(fid in chosen)])


def selection_wkt(selection: Selection, grid: GridSpec) -> list[str]:
    return [polygon_wkt(cell_polygon(grid, grid.from_flat(f))) for f in selection.chosen]
