"""Lagged kernel-density features and their boxcar-Hawkes reading."""
import numpy as np
import pytest

from kernelcast.events import EventSet
from kernelcast.geometry import StudyRegion, build_grid, cell_centroids
from kernelcast.kde import (InsufficientHistoryError, KdeConfig, hawkes_equivalence_check,
                            hawkes_self_excitation, kde_at_points, kde_feature_block, kde_lag,
                            write_feature_block_csv)

REGION = StudyRegion(0.0, 0.0, 2000.0, 2000.0)
CFG = KdeConfig(bandwidth_ft=300.0, n_lags=3, window_days=7.0)


@pytest.fixture
def grid():
    return build_grid(REGION, 250, 250, 0.2)


def random_events(rng, n, t_lo=0.0, t_hi=30.0):
    return EventSet(rng.uniform(t_lo, t_hi, n), rng.uniform(0, 2000, n), rng.uniform(0, 2000, n))


def brute_lag(ev, x, y, t, j, cfg):
    total = 0.0
    for ti, xi, yi in zip(ev.t, ev.x, ev.y):
        if t - j * cfg.window_days < ti <= t - (j - 1) * cfg.window_days:
            total += np.exp(-((x - xi) ** 2 + (y - yi) ** 2) / (2 * cfg.bandwidth_ft ** 2))
    return total


class TestKdeLag:
    def test_no_events(self):
        assert kde_lag(EventSet.empty(), 0, 0, 10, 1, CFG) == 0.0

    def test_event_at_query_point(self):
        ev = EventSet(np.array([9.0]), np.array([5.0]), np.array([6.0]))
        assert kde_lag(ev, 5.0, 6.0, 10.0, 1, CFG) == 1.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        ev = random_events(rng, 50)
        for j in (1, 2, 3):
            got = kde_lag(ev, 700.0, 1200.0, 25.0, j, CFG)
            np.testing.assert_allclose(got, brute_lag(ev, 700.0, 1200.0, 25.0, j, CFG), rtol=1e-12)

    def test_bracket(self):
        # (t - D, t]: the right edge belongs to lag 1, the left edge to lag 2
        ev = EventSet(np.array([10.0, 3.0]), np.zeros(2), np.zeros(2))
        assert kde_lag(ev, 0, 0, 10.0, 1, CFG) == 1.0
        assert kde_lag(ev, 0, 0, 10.0, 2, CFG) == 1.0

    def test_lag_range(self):
        with pytest.raises(ValueError):
            kde_lag(EventSet.empty(), 0, 0, 0, 4, CFG)


class TestFeatureBlock:
    def test_zero_events(self, grid):
        block = kde_feature_block(EventSet.empty(), grid, 30.0, CFG)
        assert block.shape == (grid.n_cells, 3) and not block.any()

    def test_single_event_one_lag(self, grid):
        ev = EventSet(np.array([12.0]), np.array([1000.0]), np.array([1000.0]))
        block = kde_feature_block(ev, grid, 21.0, CFG, history_start=0.0)
        assert np.count_nonzero(block.any(axis=0)) == 1
        assert block[:, 1].all() and not block[:, [0, 2]].any()

    def test_own_cell_is_largest(self, grid):
        cfg = KdeConfig(20.0, 1, 7.0)
        cents = cell_centroids(grid)
        fid = 17
        ev = EventSet(np.array([5.0]), cents[fid, :1] + 3.0, cents[fid, 1:] - 2.0)
        block = kde_feature_block(ev, grid, 7.0, cfg, history_start=0.0)
        assert np.argmax(block[:, 0]) == fid

    def test_matches_pointwise(self, grid):
        rng = np.random.default_rng(1)
        ev = random_events(rng, 200)
        block = kde_feature_block(ev, grid, 25.0, CFG, history_start=0.0)
        cents = cell_centroids(grid)
        for c in rng.choice(grid.n_cells, 10, replace=False):
            for j in (1, 2, 3):
                np.testing.assert_allclose(block[c, j - 1], kde_lag(ev, *cents[c], 25.0, j, CFG),
                                           rtol=1e-12)

    def test_insufficient_history(self, grid):
        ev = EventSet(np.array([5.0]), np.array([10.0]), np.array([10.0]))
        with pytest.raises(InsufficientHistoryError) as info:
            kde_feature_block(ev, grid, 20.0, CFG, history_start=5.0)
        assert info.value.earliest_forecast_time == 26.0
        assert "26" in str(info.value)

    def test_truncated_close_to_exact(self, grid):
        rng = np.random.default_rng(2)
        ev = random_events(rng, 500)
        exact = kde_feature_block(ev, grid, 25.0, CFG, history_start=0.0)
        trunc = kde_feature_block(ev, grid, 25.0, CFG, history_start=0.0, truncate=True)
        # each dropped term is at most exp(-18)
        assert np.all(np.abs(exact - trunc) <= 500 * np.exp(-18))

    def test_csv(self, grid, tmp_path):
        block = np.arange(6.0).reshape(2, 3)
        write_feature_block_csv(tmp_path / "f.csv", block, [4, 9])
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "flat_id,lag_1,lag_2,lag_3"
        assert lines[2] == "9,3.0,4.0,5.0"


class TestProperties:
    def test_causality(self, grid):
        rng = np.random.default_rng(3)
        ev = random_events(rng, 300, 0, 40)
        t = 25.0
        past = ev.select(ev.t <= t)
        np.testing.assert_array_equal(kde_feature_block(ev, grid, t, CFG, history_start=0.0),
                                      kde_feature_block(past, grid, t, CFG, history_start=0.0))

    def test_translation_equivariance(self):
        rng = np.random.default_rng(4)
        ev = random_events(rng, 100)
        q = rng.uniform(0, 2000, (2, 20))
        shifted = EventSet(ev.t, ev.x + 1e4, ev.y - 3e3)
        np.testing.assert_allclose(kde_at_points(ev, q[0], q[1], 25.0, CFG),
                                   kde_at_points(shifted, q[0] + 1e4, q[1] - 3e3, 25.0, CFG),
                                   rtol=1e-9, atol=1e-300)

    def test_bandwidth_monotone(self):
        ev = EventSet(np.array([1.0]), np.array([0.0]), np.array([0.0]))
        vals = [kde_lag(ev, 400.0, 0.0, 5.0, 1, KdeConfig(bw, 1, 7.0)) for bw in (50, 100, 200, 400, 800)]
        assert np.all(np.diff(vals) > 0)

    def test_lag_partition(self):
        rng = np.random.default_rng(5)
        ev = random_events(rng, 200)
        q = rng.uniform(0, 2000, (2, 15))
        lags = kde_at_points(ev, q[0], q[1], 28.0, CFG).sum(axis=1)
        union = kde_at_points(ev, q[0], q[1], 28.0, KdeConfig(300.0, 1, 21.0))[:, 0]
        np.testing.assert_allclose(lags, union, rtol=1e-12)


class TestHawkesEquivalence:
    def test_empty(self, grid):
        assert hawkes_equivalence_check(EventSet.empty(), grid, 10.0, CFG)

    def test_random(self, grid):
        rng = np.random.default_rng(6)
        assert hawkes_equivalence_check(random_events(rng, 100), grid, 20.0, KdeConfig(300.0, 1, 7.0))

    def test_boundary_perturbation(self, grid):
        rng = np.random.default_rng(7)
        ev = random_events(rng, 60)
        t, cfg = 20.0, KdeConfig(300.0, 1, 7.0)
        for new_t in (t - 7.0, t - 7.0 + 1e-9, t, t + 1e-9):
            tt = ev.t.copy()
            tt[0] = new_t
            moved = EventSet(tt, ev.x, ev.y)
            assert hawkes_equivalence_check(moved, grid, t, cfg)
            inside = t - 7.0 < new_t <= t
            base = hawkes_self_excitation(ev.select(np.arange(1, 60)), ev.x[0], ev.y[0], t, 7.0, 300.0)
            got = hawkes_self_excitation(moved, ev.x[0], ev.y[0], t, 7.0, 300.0)
            assert np.isclose(got - base, 1.0 if inside else 0.0, atol=1e-12)
