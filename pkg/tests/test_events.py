"""Event ingestion, temporal windowing and count cubes."""
import datetime as dt
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelcast.events import (AggregatedCube, EventFormatError, EventRecord, EventSet,
                               TemporalWindowing, aggregate, as_event_set, load_cube_npz,
                               load_events, read_cube_csv, save_cube_npz, write_cube_csv,
                               write_events)
from kernelcast.geometry import StudyRegion, build_grid

HEADER = "category,date,x_ft,y_ft\n"
REGION = StudyRegion(0.0, 0.0, 1000.0, 1000.0)


@pytest.fixture
def grid():
    return build_grid(REGION, 250, 250, 0.0)


def write(tmp_path, body, name="ev.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


class TestLoadEvents:
    def test_calendar_days(self, tmp_path):
        p = write(tmp_path, "BURGLARY,2016-02-01,7650000.0,680000.0\n")
        (rec,) = load_events(p, None, "2016-01-01")
        assert rec == EventRecord("BURGLARY", 31.0, 7650000.0, 680000.0)

    def test_header_only(self, tmp_path):
        assert load_events(write(tmp_path, "")) == []

    def test_category_filter_counts(self, tmp_path):
        rng = np.random.default_rng(0)
        cats = rng.choice(["A", "B", "C"], size=200)
        body = "".join(f"{c},2017-03-{1 + i % 28:02d},{i}.0,{i}.5\n" for i, c in enumerate(cats))
        p = write(tmp_path, body)
        for c in "ABC":
            assert len(load_events(p, c, dt.date(2017, 1, 1))) == int(np.sum(cats == c))

    def test_unknown_category_warns(self, tmp_path, caplog):
        p = write(tmp_path, "A,2017-01-02,1,1\n")
        with caplog.at_level(logging.WARNING):
            assert load_events(p, "ZZZ") == []
        assert "ZZZ" in caplog.text

    @pytest.mark.parametrize("body,line", [
        ("A,2017-01-02,1,1\nA,2017-13-02,1,1\n", 3),
        ("A,2017-01-02,1\n", 2),
        ("A,2017-01-02,1,1\nA,2017-01-02,x,1\n", 3),
    ])
    def test_malformed_row_reports_line(self, tmp_path, body, line):
        with pytest.raises(EventFormatError, match=f"line {line}"):
            load_events(write(tmp_path, body))

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c,d\n")
        with pytest.raises(EventFormatError, match="line 1"):
            load_events(p)

    def test_negative_time_rejected(self, tmp_path):
        with pytest.raises(EventFormatError):
            load_events(write(tmp_path, "A,2015-12-31,1,1\n"), None, "2016-01-01")

    def test_write_round_trip(self, tmp_path):
        ev = EventSet(np.array([3.7, 0.2, 10.0]), np.array([1.5, 2.5, 3.5]), np.array([4.0, 5.0, 6.0]))
        p = tmp_path / "out.csv"
        write_events(p, ev, "2020-01-01", "X")
        back = as_event_set(load_events(p, None, "2020-01-01"))
        np.testing.assert_array_equal(back.t, [0.0, 3.0, 10.0])
        np.testing.assert_array_equal(back.x, [2.5, 1.5, 3.5])


class TestEventSet:
    def test_read_only(self):
        ev = EventSet(np.zeros(2), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            ev.t[0] = 1.0

    def test_from_array(self):
        ev = as_event_set(np.array([[1.0, 2.0, 3.0]]))
        assert (ev.x[0], ev.y[0], ev.t[0]) == (1.0, 2.0, 3.0)

    def test_before_is_inclusive(self):
        ev = EventSet(np.array([1.0, 2.0, 3.0]), np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(ev.before(2.0).t, [1.0, 2.0])


class TestWindowing:
    def test_half_open_periods(self):
        w = TemporalWindowing(7.0, 0.0, 3)
        np.testing.assert_array_equal(w.period_of([0.0, 0.5, 7.0, 7.01, 21.0, 21.5]),
                                      [-1, 0, 0, 1, 2, -1])

    def test_ending_at(self):
        w = TemporalWindowing.ending_at(100.0, 10.0, 4)
        np.testing.assert_array_equal(w.edges, [60, 70, 80, 90, 100])


class TestAggregate:
    def test_single_event(self, grid):
        cube = aggregate(EventSet(np.array([3.0]), np.array([10.0]), np.array([10.0])),
                         grid, TemporalWindowing(7.0, 0.0, 2))
        assert np.count_nonzero(cube.counts) == 1
        assert cube.counts[0, 0] == 1

    def test_duplicates(self, grid):
        ev = EventSet(np.array([3.0, 3.0]), np.array([600.0, 600.0]), np.array([10.0, 10.0]))
        cube = aggregate(ev, grid, TemporalWindowing(7.0, 0.0, 1))
        assert cube.counts[0, 2] == 2 and cube.total == 2

    def test_conservation(self, grid):
        rng = np.random.default_rng(5)
        n = 10_000
        ev = EventSet(rng.uniform(0, 30, n), rng.uniform(-100, 1100, n), rng.uniform(-100, 1100, n))
        cube = aggregate(ev, grid, TemporalWindowing(7.0, 0.0, 4))
        assert cube.total + cube.dropped == n
        assert cube.dropped_space > 0 and cube.dropped_time > 0

    def test_order_invariance(self, grid):
        rng = np.random.default_rng(6)
        ev = EventSet(rng.uniform(0, 28, 500), rng.uniform(0, 1000, 500), rng.uniform(0, 1000, 500))
        w = TemporalWindowing(7.0, 0.0, 4)
        perm = rng.permutation(500)
        np.testing.assert_array_equal(aggregate(ev, grid, w).counts,
                                      aggregate(ev.select(perm), grid, w).counts)

    def test_counts_read_only(self, grid):
        cube = aggregate(EventSet.empty(), grid, TemporalWindowing(7.0, 0.0, 1))
        with pytest.raises(ValueError):
            cube.counts[0, 0] = 3

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 15), st.integers(1, 4)), max_size=20))
    def test_expansion_reaggregates(self, entries):
        grid = build_grid(REGION, 250, 250, 0.3)
        w = TemporalWindowing(7.0, 10.0, 3)
        counts = np.zeros((3, grid.n_cells), dtype=np.int64)
        for p, c, k in entries:
            counts[p, c] += k
        cube = AggregatedCube(counts, grid, w)
        np.testing.assert_array_equal(aggregate(cube.to_events(), grid, w).counts, counts)

    def test_serialization(self, grid, tmp_path):
        rng = np.random.default_rng(7)
        ev = EventSet(rng.uniform(0, 28, 300), rng.uniform(0, 1000, 300), rng.uniform(0, 1000, 300))
        w = TemporalWindowing(7.0, 0.0, 4)
        cube = aggregate(ev, grid, w)
        write_cube_csv(tmp_path / "c.csv", cube)
        np.testing.assert_array_equal(read_cube_csv(tmp_path / "c.csv", grid, w).counts, cube.counts)
        save_cube_npz(tmp_path / "c.npz", cube)
        back = load_cube_npz(tmp_path / "c.npz")
        np.testing.assert_array_equal(back.counts, cube.counts)
        assert back.grid == grid and back.windowing == w
