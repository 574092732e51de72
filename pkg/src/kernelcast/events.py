"""Event ingestion and aggregation into per-period, per-cell count cubes."""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import GridSpec, points_to_cells

log = logging.getLogger(__name__)

CSV_HEADER = ("category", "date", "x_ft", "y_ft")


class EventFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    category: str
    t_days: float
    x_ft: float
    y_ft: float

    def __post_init__(self):
        if not self.t_days >= 0:
            raise ValueError(f"t_days must be >= 0, got {self.t_days}")
        if not (np.isfinite(self.x_ft) and np.isfinite(self.y_ft)):
            raise ValueError("coordinates must be finite")


@dataclass(frozen=True)
class EventSet:
    """Column-oriented events: times in days and planar coordinates in feet."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.t) == len(self.x) == len(self.y)):
            raise ValueError("t, x, y must have equal length")

    def __len__(self) -> int:
        return len(self.t)

    def select(self, mask) -> "EventSet":
        return EventSet(self.t[mask], self.x[mask], self.y[mask])

    def before(self, cutoff: float) -> "EventSet":
        """Events with t <= cutoff."""
        return self.select(self.t <= cutoff)

    def floored(self) -> "EventSet":
        return EventSet(np.floor(self.t), self.x, self.y)

    def sorted(self) -> "EventSet":
        order = np.lexsort((self.y, self.x, self.t))
        return self.select(order)

    @classmethod
    def empty(cls) -> "EventSet":
        return cls(np.empty(0), np.empty(0), np.empty(0))

    @classmethod
    def concat(cls, parts: Sequence["EventSet"]) -> "EventSet":
        if not parts:
            return cls.empty()
        return cls(np.concatenate([p.t for p in parts]),
                   np.concatenate([p.x for p in parts]),
                   np.concatenate([p.y for p in parts]))


def as_event_set(events) -> EventSet:
    """Accept an EventSet, a list of EventRecord, or an (n, 3) array of (x, y, t)."""
    if isinstance(events, EventSet):
        return events
    if isinstance(events, np.ndarray):
        if events.size == 0:
            return EventSet.empty()
        return EventSet(events[:, 2], events[:, 0], events[:, 1])
    events = list(events)
    if not events:
        return EventSet.empty()
    return EventSet(np.array([e.t_days for e in events]),
                    np.array([e.x_ft for e in events]),
                    np.array([e.y_ft for e in events]))


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip()[:10])


def load_events(path, category_filter: str | None = None,
                epoch_date: dt.date | str = dt.date(1970, 1, 1)) -> list[EventRecord]:
    """Read ``category,date,x_ft,y_ft`` CSV rows as whole-day events since ``epoch_date``."""
    if isinstance(epoch_date, str):
        epoch_date = _parse_date(epoch_date)
    out: list[EventRecord] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return out
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise EventFormatError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise EventFormatError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            cat = row[0].strip()
            seen.add(cat)
            try:
                day = (_parse_date(row[1]) - epoch_date).days
                rec = EventRecord(cat, float(day), float(row[2]), float(row[3]))
            except ValueError as exc:
                raise EventFormatError(f"{path}: line {lineno}: {exc}") from None
            if category_filter is None or cat == category_filter:
                out.append(rec)
    if category_filter is not None and category_filter not in seen:
        log.warning("category %r not present in %s", category_filter, path)
    return out


def write_events(path, events, epoch_date: dt.date | str = dt.date(1970, 1, 1),
                 category: str = "EVENT") -> None:
    """Write events in the ingest CSV format; times are floored to whole days."""
    if isinstance(epoch_date, str):
        epoch_date = _parse_date(epoch_date)
    ev = as_event_set(events).sorted()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, x, y in zip(ev.t, ev.x, ev.y):
            day = epoch_date + dt.timedelta(days=int(np.floor(t)))
            w.writerow([category, day.isoformat(), repr(float(x)), repr(float(y))])


@dataclass(frozen=True)
class TemporalWindowing:
    """``n_periods`` contiguous periods of ``period_days``.

    Period ``k`` is the half-open interval
    ``(horizon_start_day + k*D, horizon_start_day + (k+1)*D]``.
    """

    period_days: float
    horizon_start_day: float
    n_periods: int

    def __post_init__(self):
        if self.period_days <= 0 or self.n_periods < 1:
            raise ValueError("period_days must be positive and n_periods >= 1")

    @classmethod
    def ending_at(cls, cutoff: float, period_days: float, n_periods: int) -> "TemporalWindowing":
        return cls(period_days, cutoff - n_periods * period_days, n_periods)

    @property
    def edges(self) -> np.ndarray:
        return self.horizon_start_day + self.period_days * np.arange(self.n_periods + 1)

    def period_of(self, t) -> np.ndarray:
        """Period index per time, -1 outside the horizon."""
        t = np.asarray(t, dtype=float)
        # side="left" puts t == edge[k+1] into period k: (lo, hi] membership
        k = np.searchsorted(self.edges, t, side="left") - 1
        return np.where((k >= 0) & (k < self.n_periods), k, -1)


@dataclass(frozen=True)
class AggregatedCube:
    counts: np.ndarray  # (n_periods, n_cells) int64
    grid: GridSpec
    windowing: TemporalWindowing
    dropped_space: int = 0
    dropped_time: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_space + self.dropped_time

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_events(self) -> EventSet:
        """Expand each count into centroid-located events at its period's right edge."""
        from .geometry import cell_centroids

        cent = cell_centroids(self.grid)
        p, c = np.nonzero(self.counts)
        reps = self.counts[p, c]
        p, c = np.repeat(p, reps), np.repeat(c, reps)
        t = self.windowing.edges[p + 1]
        return EventSet(t, cent[c, 0], cent[c, 1])


def aggregate(events, grid: GridSpec, windowing: TemporalWindowing) -> AggregatedCube:
    ev = as_event_set(events)
    period = windowing.period_of(ev.t)
    cell = points_to_cells(grid, ev.x, ev.y, strict=False) if len(ev) else np.empty(0, np.int64)
    in_time = period >= 0
    in_space = cell >= 0
    keep = in_time & in_space
    flat = period[keep] * grid.n_cells + cell[keep]
    counts = np.bincount(flat, minlength=windowing.n_periods * grid.n_cells)
    counts = counts.reshape(windowing.n_periods, grid.n_cells).astype(np.int64)
    counts.setflags(write=False)
    return AggregatedCube(counts, grid, windowing,
                          dropped_space=int((in_time & ~in_space).sum()),
                          dropped_time=int((~in_time).sum()))


def write_cube_csv(path, cube: AggregatedCube) -> None:
    """Long format ``period,flat_id,count`` with nonzero entries only."""
    p, c = np.nonzero(cube.counts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "flat_id", "count"])
        for a, b in zip(p, c):
            w.writerow([int(a), int(b), int(cube.counts[a, b])])


def read_cube_csv(path, grid: GridSpec, windowing: TemporalWindowing) -> AggregatedCube:
    counts = np.zeros((windowing.n_periods, grid.n_cells), dtype=np.int64)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            counts[int(row["period"]), int(row["flat_id"])] += int(row["count"])
    counts.setflags(write=False)
    return AggregatedCube(counts, grid, windowing)


def save_cube_npz(path, cube: AggregatedCube) -> None:
    meta = {
        "grid": cube.grid.to_dict(),
        "windowing": {"period_days": cube.windowing.period_days,
                      "horizon_start_day": cube.windowing.horizon_start_day,
                      "n_periods": cube.windowing.n_periods},
        "dropped_space": cube.dropped_space,
        "dropped_time": cube.dropped_time,
    }
    np.savez_compressed(path, counts=cube.counts, meta=np.array(json.dumps(meta)))


def load_cube_npz(path) -> AggregatedCube:
    with np.load(path) as z:
        counts = z["counts"].astype(np.int64)
        meta = json.loads(str(z["meta"]))
    counts.setflags(write=False)
    return AggregatedCube(counts, GridSpec.from_dict(meta["grid"]),
                          TemporalWindowing(**meta["windowing"]),
                          meta["dropped_space"], meta["dropped_time"])
