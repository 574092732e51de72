"""Ablation variants, the rolling-score bootstrap envelope, and SVG rendering."""
import datetime as dt
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from kernelcast.config import HyperParams
from kernelcast.experiments import (ABLATIONS, KdeBaseline, ablation_rows, ablation_variant,
                                    bootstrap_pei_envelope, expected_cell_counts, hawkes_scenario,
                                    run_ablation)
from kernelcast.forecast import GridContext, PipelineOptions, rolling_forecast
from kernelcast.geometry import StudyRegion, build_grid
from kernelcast.metrics import Selection
from kernelcast.render import FN, FP, TP, classify_cells, hotspot_map_svg, rff_curve_svg
from kernelcast.search import build_cv_plan
from kernelcast.synth import simulate_hawkes, simulate_poisson

REGION = StudyRegion(0.0, 0.0, 4000.0, 4000.0)
HP = HyperParams(250, 250, 0.0, 750, 30, 0.0, 4, 0.0, 1e-3, 250, 2, 10)
OPTS = PipelineOptions(max_train_periods=6)


class TestAblation:
    def test_variants(self):
        hp = HP.replace(rotation_rad=0.3)
        base = ablation_variant(hp, "kde_baseline", KdeBaseline(500.0, 30.0))
        assert (base.d, base.kde_lags, base.kde_bandwidth_ft, base.kde_window_days) == (0, 1, 500.0, 30.0)
        assert ablation_variant(hp, "no_rff").d == 0
        assert ablation_variant(hp, "no_rotation").rotation_rad == 0.0
        fixed = ablation_variant(hp, "fixed_600_cells")
        assert (fixed.cell_w_ft, fixed.cell_h_ft) == (600.0, 600.0)
        assert ablation_variant(hp, "full") == hp
        with pytest.raises(ValueError):
            ablation_variant(hp, "no_kde")

    def test_rotation_noop(self):
        ev = simulate_hawkes(hawkes_scenario(2, REGION, horizon_days=800, n_bumps=4))
        plan = build_cv_plan((0.0, 800.0), 7.0, 60, dt.date(2012, 1, 1), min_history_days=120)
        res = run_ablation(HP, ev, plan, REGION, OPTS, variants=("full", "no_rotation"))
        assert res["full"].fold_peis == res["no_rotation"].fold_peis
        rows = ablation_rows(res)
        assert [r["variant"] for r in rows] == ["full", "no_rotation"]
        assert set(ABLATIONS) >= set(res)


class TestEnvelope:
    def test_expected_counts_constant(self):
        ctx = GridContext.build(REGION, HP, OPTS)
        mu = expected_cell_counts(lambda x, y, t: np.full(x.shape, 2e-6), ctx, 0.0, 7.0)
        np.testing.assert_allclose(mu[ctx.active], 2e-6 * 62_500 * 7.0, rtol=1e-12)

    def test_thirteen_stationary_windows(self):
        spec = hawkes_scenario(21, REGION, horizon_days=400, branching_ratio=0.0, n_bumps=4)
        ev, rho = simulate_poisson(spec)
        model, res = rolling_forecast(HP, ev, REGION, 300.0, 7.0, 13, 0.0, OPTS)
        observed = np.var([r.pei for _, r in res], ddof=1)
        sels = [fc.selection for fc, _ in res]
        expected = [expected_cell_counts(rho, model.ctx, fc.cutoff, 7.0) for fc, _ in res]
        env = bootstrap_pei_envelope(sels, expected, n_boot=400, seed=0, active=model.ctx.active)
        assert env["low"] <= observed <= env["high"]

    def test_envelope_shrinks_with_rate(self):
        sel = [Selection((0, 1), 2.0)] * 13
        lo_rate = bootstrap_pei_envelope(sel, [np.array([1.0, 1.0, 1.0, 1.0])] * 13, 200, 1)
        hi_rate = bootstrap_pei_envelope(sel, [np.array([100.0, 100.0, 100.0, 100.0])] * 13, 200, 1)
        assert hi_rate["high"] < lo_rate["high"]


class TestRender:
    def test_colours(self):
        sel = Selection((0, 1), 2.0)
        col = classify_cells(sel, np.array([5, 0, 4, 0]))
        assert col == {0: TP, 1: FP, 2: FN}
        assert classify_cells(sel) == {0: FP, 1: FP}

    def test_map_is_valid_svg(self):
        g = build_grid(REGION, 500, 500, 0.2)
        sel = Selection((3, 4, 5), 3 * 250_000.0)
        truth = np.zeros(g.n_cells, dtype=int)
        truth[[4, 9, 10]] = 3
        svg = hotspot_map_svg(g, REGION, sel, truth, title="a & b")
        root = ET.fromstring(svg)
        polys = [e for e in root if e.tag.endswith("polygon")]
        assert sorted(p.get("fill") for p in polys) == sorted([TP, FP, FP, FN, FN])
        assert svg == hotspot_map_svg(g, REGION, sel, truth, title="a & b")

    def test_curve(self):
        svg = rff_curve_svg([(5, 0.2, 0.5), (50, 0.05, 0.1), (500, 0.01, 0.03)])
        root = ET.fromstring(svg)
        assert sum(e.tag.endswith("circle") for e in root) == 3
