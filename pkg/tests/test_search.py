"""Yearly crossvalidation, grid search, Bayesian optimisation and merging."""
import datetime as dt

import numpy as np
import pytest
from scipy.stats import norm

from kernelcast.config import HyperParams
from kernelcast.events import EventSet
from kernelcast.experiments import hawkes_scenario
from kernelcast.forecast import PipelineOptions
from kernelcast.geometry import StudyRegion
from kernelcast.search import (SearchResult, bayes_opt, build_cv_plan, evaluate_candidate,
                               expand_grid, expected_improvement, grid_search, maximize,
                               merge_results, pei_distribution_report, rank_results,
                               write_results_csv)
from kernelcast.synth import simulate_hawkes

EPOCH = dt.date(2012, 1, 1)
REGION = StudyRegion(0.0, 0.0, 4000.0, 4000.0)
BASE = HyperParams(250, 250, 0.0, 750, 30, 0.0, 4, 0.0, 1e-3, 250, 2, 10)
OPTS = PipelineOptions(max_train_periods=6)


@pytest.fixture(scope="module")
def events():
    return simulate_hawkes(hawkes_scenario(3, REGION, horizon_days=800, n_bumps=4)).floored()


@pytest.fixture(scope="module")
def plan():
    return build_cv_plan((0.0, 800.0), 7.0, 60, EPOCH, min_history_days=120)


def result(pei, **hp):
    return SearchResult(BASE.replace(**hp), [pei], pei)


class TestCvPlan:
    def test_five_years(self):
        end = (dt.date(2016, 12, 31) - EPOCH).days
        plan = build_cv_plan((0.0, float(end)), 7.0, 60, EPOCH)
        assert [f.year for f in plan.folds] == [2012, 2013, 2014, 2015, 2016]
        assert plan.folds[1].cutoff == (dt.date(2013, 3, 1) - EPOCH).days - 1

    def test_two_years(self):
        end = (dt.date(2013, 12, 31) - EPOCH).days
        assert len(build_cv_plan((0.0, float(end)), 7.0, 60, EPOCH).folds) == 2

    def test_causal(self, events):
        end = (dt.date(2016, 12, 31) - EPOCH).days
        plan = build_cv_plan((0.0, float(end)), 7.0, 60, EPOCH)
        t = np.arange(0.0, end + 1)
        for fold in plan.folds:
            lo, hi = fold.validation(7.0)
            val = t[(t > lo) & (t <= hi)]
            assert t[plan.training_mask(fold, t)].max() < val.min()

    def test_min_history(self):
        end = (dt.date(2016, 12, 31) - EPOCH).days
        plan = build_cv_plan((0.0, float(end)), 7.0, 60, EPOCH, min_history_days=365)
        assert [f.year for f in plan.folds] == [2013, 2014, 2015, 2016]

    @pytest.mark.parametrize("span,w", [((0.0, 500.0), 7.0), ((0.0, 2000.0), 400.0)])
    def test_errors(self, span, w):
        with pytest.raises(ValueError):
            build_cv_plan(span, w, 60, EPOCH)


class TestEvaluate:
    def test_single_hot_cell(self, plan):
        t = np.arange(1.0, 801.0)
        ev = EventSet(t, np.full(t.size, 1125.0), np.full(t.size, 2125.0))
        res = evaluate_candidate(BASE, ev, plan, REGION, OPTS)
        assert res.feasible and res.fold_peis == [1.0] * len(plan.folds)

    def test_deterministic(self, events, plan):
        a = evaluate_candidate(BASE, events, plan, REGION, OPTS)
        b = evaluate_candidate(BASE, events, plan, REGION, OPTS)
        assert a.fold_peis == b.fold_peis
        assert a.mean_pei == pytest.approx(np.mean(a.fold_peis), abs=0)

    def test_infeasible_scores_zero(self, events, plan):
        res = evaluate_candidate(BASE.replace(kde_lags=30, kde_window_days=30), events, plan,
                                 REGION, OPTS)
        assert not res.feasible and res.mean_pei == 0.0 and res.message

    def test_bad_grid_scores_zero(self, events, plan):
        res = evaluate_candidate(BASE.replace(cell_w_ft=100), events, plan, REGION, OPTS)
        assert not res.feasible and res.mean_pei == 0.0


class TestGrid:
    def test_expand(self):
        hps = expand_grid({"d": [0, 4, 8], "a": [0.0, 0.1], "kde_lags": [1, 2]}, BASE)
        assert len(hps) == 12 and len(set(hps)) == 12
        assert all(isinstance(h.d, int) for h in hps)

    def test_empty(self):
        with pytest.raises(ValueError):
            expand_grid({"d": []}, BASE)

    def test_grid_search_count(self, events, plan):
        res = grid_search({"d": [0, 4], "kde_lags": [1, 2]}, events, plan, REGION, BASE, options=OPTS)
        assert len(res) == 4
        assert [r.mean_pei for r in res] == sorted((r.mean_pei for r in res), reverse=True)

    def test_rank_tiebreaks(self):
        pop = [result(0.5, d=8), result(0.5, d=4, a=0.2), result(0.5, d=4, a=0.1), result(0.7, d=20)]
        ranked = rank_results(pop)
        assert [(r.hp.d, r.hp.a) for r in ranked] == [(20, 0.0), (4, 0.1), (4, 0.2), (8, 0.0)]

    def test_rank_order_invariant(self):
        pop = [result(p, d=d) for p, d in [(0.1, 4), (0.4, 8), (0.4, 4), (0.2, 2)]]
        a = [r.hp for r in rank_results(list(pop))]
        b = [r.hp for r in rank_results(list(reversed(pop)))]
        assert a == b

    def test_csv(self, tmp_path):
        write_results_csv(tmp_path / "r.csv", rank_results([result(0.1), result(0.3, d=8)]))
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert len(lines) == 3 and "mean_pei" in lines[0] and "provenance" in lines[0]


class TestBayesOpt:
    def test_ei_closed_form(self):
        mu, sd, best = np.array([1.0]), np.array([0.5]), 0.8
        z = (mu - best) / sd
        np.testing.assert_allclose(expected_improvement(mu, sd, best),
                                   (mu - best) * norm.cdf(z) + sd * norm.pdf(z))
        assert expected_improvement(np.array([0.0]), np.array([0.0]), 1.0)[0] >= 0

    def test_init_only(self):
        tr = maximize(lambda u: -float(np.sum(u ** 2)), 2, 5, 0, seed=3)
        assert tr.X.shape == (5, 2) and tr.kind == ["init"] * 5

    def test_quadratic(self):
        hits = 0
        for seed in range(10):
            tr = maximize(lambda u: -float((u[0] - 0.37) ** 2), 1, 4, 8, seed=seed)
            hits += abs(tr.X[np.argmax(tr.y), 0] - 0.37) <= 1e-2
        assert hits >= 8

    def test_degenerate_bounds(self, events, plan):
        with pytest.raises(ValueError):
            bayes_opt({"a": (0.1, 0.1)}, events, plan, REGION, BASE)

    def test_categorical_rejected(self, events, plan):
        with pytest.raises(ValueError):
            bayes_opt({"kernel_family": (0, 1)}, events, plan, REGION, BASE)

    def test_small_run(self, events, plan):
        res = bayes_opt({"kde_bandwidth_ft": (100.0, 800.0)}, events, plan, REGION, BASE,
                        n_init=2, n_iter=1, bo_seed=1, options=OPTS)
        assert len(res) == 3 and all(r.provenance == "bo" for r in res)
        assert all(100.0 <= r.hp.kde_bandwidth_ft <= 800.0 for r in res)


class TestMerge:
    def test_merged_best_dominates(self):
        g = [result(0.2), result(0.5, d=8)]
        b = [result(0.6, d=2), result(0.1, d=6)]
        m = merge_results(g, b)
        assert len(m) == 4
        assert m[0].mean_pei >= max(r.mean_pei for r in g)
        assert m[0].mean_pei >= max(r.mean_pei for r in b)

    def test_distribution_report(self):
        rep = pei_distribution_report([result(0.0), result(0.0), result(1.0)])
        assert rep["fraction_zero_pei"] == pytest.approx(2 / 3)
        assert rep["max_pei"] == 1.0
        # mean 1/3, sample sd 1/sqrt(3)
        assert rep["z_score_of_max"] == pytest.approx((2 / 3) * np.sqrt(3))

    def test_zero_variance(self):
        rep = pei_distribution_report([result(0.4), result(0.4)])
        assert rep["z_score_of_max"] is None and not rep["z_score_defined"]

    def test_rounding_noise_is_zero_variance(self):
        rep = pei_distribution_report([result(0.8), result(0.8), result(0.8000000000000002)])
        assert rep["z_score_of_max"] is None

    def test_too_small(self):
        with pytest.raises(ValueError):
            pei_distribution_report([result(0.4)])
