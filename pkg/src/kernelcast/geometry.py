"""Rotated rectangular tessellations of a planar study region.

All coordinates are planar feet (already projected). A grid is a lattice of
``n_cols x n_rows`` rectangles of size ``cell_w_ft x cell_h_ft`` whose lower
left corner sits at ``(origin_x, origin_y)`` and which is rotated
counterclockwise by ``rotation_rad`` about that corner.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

SQFT_PER_SQMI = 27_878_400.0
MIN_CELL_AREA_SQFT = 62_500.0
MAX_CELL_AREA_SQFT = 360_000.0

# slack for points that land on the outer lattice boundary after rotation
_EDGE_TOL_FT = 1e-7


class GridConstraintError(ValueError):
    """Cell dimensions or rotation fall outside the allowed range."""


class OutOfBoundsError(ValueError):
    """A point or cell index lies outside the grid."""


@dataclass(frozen=True)
class StudyRegion:
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    total_area_sqft: float | None = None

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise ValueError(f"degenerate region {self}")
        bbox = (self.max_x - self.min_x) * (self.max_y - self.min_y)
        if self.total_area_sqft is None:
            object.__setattr__(self, "total_area_sqft", bbox)
        elif not 0 < self.total_area_sqft <= bbox * (1 + 1e-12):
            raise ValueError("total_area_sqft must be positive and at most the bounding-box area")

    @property
    def centroid(self) -> tuple[float, float]:
        return 0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y)

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= self.min_x) & (x <= self.max_x) & (y >= self.min_y) & (y <= self.max_y)


@dataclass(frozen=True)
class CellIndex:
    col: int
    row: int
    flat_id: int


@dataclass(frozen=True)
class GridSpec:
    cell_w_ft: float
    cell_h_ft: float
    rotation_rad: float
    origin_x: float
    origin_y: float
    n_cols: int
    n_rows: int

    def __post_init__(self):
        if self.cell_w_ft <= 0 or self.cell_h_ft <= 0:
            raise GridConstraintError("cell dimensions must be positive")
        if self.n_cols < 1 or self.n_rows < 1:
            raise GridConstraintError("grid must have at least one cell")

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def cell_area_sqft(self) -> float:
        return self.cell_w_ft * self.cell_h_ft

    # -- index helpers -------------------------------------------------

    def cell(self, col: int, row: int) -> CellIndex:
        if not (0 <= col < self.n_cols and 0 <= row < self.n_rows):
            raise OutOfBoundsError(f"cell ({col}, {row}) outside {self.n_cols}x{self.n_rows} grid")
        return CellIndex(int(col), int(row), int(row * self.n_cols + col))

    def from_flat(self, flat_id: int) -> CellIndex:
        if not 0 <= flat_id < self.n_cells:
            raise OutOfBoundsError(f"flat id {flat_id} outside grid of {self.n_cells} cells")
        row, col = divmod(int(flat_id), self.n_cols)
        return CellIndex(col, row, int(flat_id))

    # -- frames --------------------------------------------------------

    def to_lattice(self, x, y):
        """World coordinates -> lattice frame (u along columns, v along rows)."""
        c, s = math.cos(self.rotation_rad), math.sin(self.rotation_rad)
        dx = np.asarray(x, dtype=float) - self.origin_x
        dy = np.asarray(y, dtype=float) - self.origin_y
        return c * dx + s * dy, -s * dx + c * dy

    def to_world(self, u, v):
        c, s = math.cos(self.rotation_rad), math.sin(self.rotation_rad)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.origin_x + c * u - s * v, self.origin_y + s * u + c * v

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            cell_w_ft=float(d["cell_w_ft"]),
            cell_h_ft=float(d["cell_h_ft"]),
            rotation_rad=float(d["rotation_rad"]),
            origin_x=float(d["origin_x"]),
            origin_y=float(d["origin_y"]),
            n_cols=int(d["n_cols"]),
            n_rows=int(d["n_rows"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "GridSpec":
        return cls.from_dict(json.loads(text))


def check_cell_area(cell_w_ft: float, cell_h_ft: float) -> None:
    area = cell_w_ft * cell_h_ft
    if not MIN_CELL_AREA_SQFT <= area <= MAX_CELL_AREA_SQFT:
        raise GridConstraintError(
            f"cell area {area:,.0f} sq ft outside [{MIN_CELL_AREA_SQFT:,.0f}, {MAX_CELL_AREA_SQFT:,.0f}]"
        )


def _ceil_cells(extent: float, size: float) -> int:
    # exact multiples must not gain a spurious extra cell from rounding noise
    return max(1, math.ceil(extent / size - 1e-9))


def build_grid(region: StudyRegion, cell_w_ft: float, cell_h_ft: float,
               rotation_rad: float = 0.0, allow_out_of_bounds: bool = False) -> GridSpec:
    """Smallest rotated lattice, centred on the region centroid, covering its bounding box.

    The lattice is rotated about the region centroid; the returned
    ``origin`` is the world position of the lattice's lower-left corner,
    which is the equivalent pivot used by every other function here.
    """
    if cell_w_ft <= 0 or cell_h_ft <= 0:
        raise GridConstraintError("cell dimensions must be positive")
    if not 0.0 <= rotation_rad < math.pi / 2:
        raise GridConstraintError(f"rotation {rotation_rad} outside [0, pi/2)")
    if not allow_out_of_bounds:
        check_cell_area(cell_w_ft, cell_h_ft)

    c, s = math.cos(rotation_rad), math.sin(rotation_rad)
    hw, hh = region.width / 2, region.height / 2
    # half extents of the bounding box seen from the rotated frame
    half_u = c * hw + s * hh
    half_v = s * hw + c * hh
    n_cols = _ceil_cells(2 * half_u, cell_w_ft)
    n_rows = _ceil_cells(2 * half_v, cell_h_ft)

    cx, cy = region.centroid
    u0, v0 = -n_cols * cell_w_ft / 2, -n_rows * cell_h_ft / 2
    ox = cx + c * u0 - s * v0
    oy = cy + s * u0 + c * v0
    if rotation_rad == 0.0:
        # keep the axis-aligned corner exact so boundaries fall on round numbers
        ox, oy = cx + u0, cy + v0
    return GridSpec(cell_w_ft, cell_h_ft, rotation_rad, ox, oy, n_cols, n_rows)


def points_to_cells(grid: GridSpec, x, y, strict: bool = True) -> np.ndarray:
    """Vectorised :func:`point_to_cell` returning flat ids.

    Points outside the lattice get ``-1`` when ``strict`` is False and raise
    :class:`OutOfBoundsError` otherwise.
    """
    u, v = grid.to_lattice(x, y)
    u = np.atleast_1d(u)
    v = np.atleast_1d(v)
    W = grid.n_cols * grid.cell_w_ft
    H = grid.n_rows * grid.cell_h_ft
    col = np.floor(u / grid.cell_w_ft).astype(np.int64)
    row = np.floor(v / grid.cell_h_ft).astype(np.int64)
    # the outer boundary of the lattice is closed so the covered region is closed
    col = np.where((col == grid.n_cols) & (u <= W + _EDGE_TOL_FT), grid.n_cols - 1, col)
    row = np.where((row == grid.n_rows) & (v <= H + _EDGE_TOL_FT), grid.n_rows - 1, row)
    col = np.where((col == -1) & (u >= -_EDGE_TOL_FT), 0, col)
    row = np.where((row == -1) & (v >= -_EDGE_TOL_FT), 0, row)
    inside = (col >= 0) & (col < grid.n_cols) & (row >= 0) & (row < grid.n_rows)
    if strict and not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise OutOfBoundsError(f"point #{bad} ({np.atleast_1d(x)[bad]}, {np.atleast_1d(y)[bad]}) outside grid")
    return np.where(inside, row * grid.n_cols + col, -1)


def point_to_cell(grid: GridSpec, x_ft: float, y_ft: float) -> CellIndex:
    flat = int(points_to_cells(grid, [x_ft], [y_ft], strict=True)[0])
    return grid.from_flat(flat)


def cell_centroid(grid: GridSpec, cell: CellIndex) -> tuple[float, float]:
    cell = grid.cell(cell.col, cell.row)
    x, y = grid.to_world((cell.col + 0.5) * grid.cell_w_ft, (cell.row + 0.5) * grid.cell_h_ft)
    return float(x), float(y)


def cell_centroids(grid: GridSpec) -> np.ndarray:
    """(n_cells, 2) centroids in flat-id order."""
    flat = np.arange(grid.n_cells)
    row, col = np.divmod(flat, grid.n_cols)
    x, y = grid.to_world((col + 0.5) * grid.cell_w_ft, (row + 0.5) * grid.cell_h_ft)
    return np.column_stack([x, y])


def cell_polygon(grid: GridSpec, cell: CellIndex) -> list[tuple[float, float]]:
    """Counterclockwise corners of the cell in world coordinates."""
    cell = grid.cell(cell.col, cell.row)
    u0, v0 = cell.col * grid.cell_w_ft, cell.row * grid.cell_h_ft
    us = np.array([u0, u0 + grid.cell_w_ft, u0 + grid.cell_w_ft, u0])
    vs = np.array([v0, v0, v0 + grid.cell_h_ft, v0 + grid.cell_h_ft])
    xs, ys = grid.to_world(us, vs)
    return [(float(a), float(b)) for a, b in zip(xs, ys)]


def polygon_area(vertices: Sequence[tuple[float, float]]) -> float:
    xy = np.asarray(vertices, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_wkt(vertices: Sequence[tuple[float, float]]) -> str:
    ring = list(vertices) + [vertices[0]]
    return "POLYGON ((" + ", ".join(f"{x!r} {y!r}" for x, y in ring) + "))"


def active_cells(grid: GridSpec, region: StudyRegion, mask=None) -> np.ndarray:
    """Boolean vector over flat ids: cells that intersect the region (and mask).

    ``mask`` is an optional shapely geometry or a sequence of polygon
    vertices; cells wholly outside it are inactive.
    """
    from shapely import box, intersects, polygons
    from shapely.geometry import Polygon

    flat = np.arange(grid.n_cells)
    row, col = np.divmod(flat, grid.n_cols)
    corners_u = np.stack([col, col + 1, col + 1, col], axis=1) * grid.cell_w_ft
    corners_v = np.stack([row, row, row + 1, row + 1], axis=1) * grid.cell_h_ft
    xs, ys = grid.to_world(corners_u, corners_v)
    cells = polygons(np.stack([xs, ys], axis=-1))
    target = box(region.min_x, region.min_y, region.max_x, region.max_y)
    if mask is not None:
        geom = mask if hasattr(mask, "geom_type") else Polygon(mask)
        target = target.intersection(geom)
    hit = intersects(cells, target)
    # touching along an edge only is not coverage
    area = np.array([c.intersection(target).area for c in cells[hit]]) if hit.any() else np.array([])
    out = np.zeros(grid.n_cells, dtype=bool)
    out[np.flatnonzero(hit)[area > 0]] = True
    return out
