"""Command-line entry point.

Subcommands: forecast, score, search {grid,bo,merged}, rolling, ablate,
simulate {poisson,hawkes}, rff-check and convert-table. Exit codes are 0
on success, 2 for bad input and 3 for numerical failure. Outputs depend
only on the inputs and ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import schemas
from .config import (HyperParams, derive_seed, hyperparams_from_table_row, read_table)
from .events import EventFormatError, as_event_set, load_events, write_events
from .experiments import KdeBaseline, ablation_rows, run_ablation
from .forecast import PipelineOptions, fit_model, forecast_at, rolling_forecast, window_counts
from .geometry import GridConstraintError, GridSpec, StudyRegion, cell_centroids
from .glm import NumericalError, model_to_dict
from .kde import InsufficientHistoryError
from .metrics import Selection, SelectionError, score, selection_wkt
from .render import hotspot_map_svg, rff_curve_svg
from .rff import RffConfig, approximation_report
from .search import (bayes_opt, build_cv_plan, grid_search, merge_results,
                     pei_distribution_report, write_results_csv)
from .synth import SynthSpec, simulate_hawkes, simulate_poisson

log = logging.getLogger("kernelcast")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


class InputError(ValueError):
    pass


# -- helpers ------------------------------------------------------------------

def _write_json(path: Path, doc: dict, schema: str) -> None:
    schemas.validate(doc, schema)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{p}: no such file")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON: {exc}") from None


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _hyperparams(args) -> HyperParams:
    doc = _read_json(args.config)
    schemas.validate(doc, "hyperparams")
    hp = HyperParams.from_dict(doc)
    if args.seed is not None:
        hp = hp.replace(seed=derive_seed(args.seed, "rff"))
    hp.validate(args.allow_out_of_bounds)
    return hp


def _events(args):
    if not Path(args.events).is_file():
        raise InputError(f"{args.events}: no such file")
    recs = load_events(args.events, args.category, args.epoch)
    if not recs:
        raise InputError(f"{args.events}: no events")
    return as_event_set(recs)


def _region(args, ev) -> StudyRegion:
    if args.region:
        try:
            vals = [float(v) for v in args.region.split(",")]
        except ValueError:
            raise InputError(f"--region must be minx,miny,maxx,maxy, got {args.region!r}") from None
        if len(vals) != 4:
            raise InputError(f"--region must be minx,miny,maxx,maxy, got {args.region!r}")
        return StudyRegion(*vals)
    return StudyRegion(float(ev.x.min()), float(ev.y.min()), float(ev.x.max()), float(ev.y.max()))


def _options(args) -> PipelineOptions:
    return PipelineOptions(max_train_periods=args.max_train_periods,
                           allow_out_of_bounds=args.allow_out_of_bounds)


def _day(args, date: dt.date) -> float:
    return float((date - args.epoch).days)


# -- subcommands --------------------------------------------------------------

def cmd_forecast(args) -> int:
    _require(args, "events", "config", "start")
    hp, ev = _hyperparams(args), _events(args)
    region, options = _region(args, ev), _options(args)
    out = _out_dir(args)
    cutoff = _day(args, args.start) - 1
    W = args.window_days
    model = fit_model(hp, ev, region, cutoff, W, None, options)
    fc = forecast_at(model, ev, options=options)
    grid = model.ctx.grid

    cents = cell_centroids(grid)
    chosen = set(fc.selection.chosen)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["flat_id", "col", "row", "x_ft", "y_ft", "active", "intensity", "selected"])
        for fid in range(grid.n_cells):
            row, col = divmod(fid, grid.n_cols)
            lam = fc.intensities[fid]
            w.writerow([fid, col, row, f"{cents[fid, 0]:.3f}", f"{cents[fid, 1]:.3f}",
                        int(model.ctx.active[fid]), "" if math.isnan(lam) else repr(float(lam)),
                        int(fid in chosen)])
    (out / "selection.wkt").write_text("\n".join(selection_wkt(fc.selection, grid)) + "\n")
    _write_json(out / "grid.json", grid.to_dict(), "grid")
    _write_json(out / "model.json",
                model_to_dict(model.params, model.report, hp.seed, hp.to_dict()), "model")
    _write_json(out / "hyperparams.json", hp.to_dict(), "hyperparams")
    _write_json(out / "forecast_meta.json", {
        "start_date": args.start.isoformat(), "cutoff_day": cutoff, "window_days": W,
        "coverage_param": hp.coverage_param, "k": fc.selection.k,
        "n_train_periods": model.n_train_periods,
        "region": [region.min_x, region.min_y, region.max_x, region.max_y],
        "epoch": args.epoch.isoformat()}, "forecast_meta")

    truth = None
    if args.truth:
        truth = as_event_set(load_events(args.truth, args.category, args.epoch))
    elif ev.t.max() >= cutoff + W:
        truth = ev
    counts = None
    if truth is not None:
        counts = np.where(model.ctx.active, window_counts(truth, grid, cutoff, W), 0)
        rep = score(fc.selection, counts, grid, options.region_area_sqft or region.total_area_sqft,
                    active=model.ctx.active)
        _write_json(out / "score.json", rep.to_dict(), "score_report")
    else:
        log.info("no truth for the forecast window; map shows selections only")
    (out / "map.svg").write_text(hotspot_map_svg(grid, region, fc.selection, counts, model.ctx.active,
                                                 title=f"forecast {args.start.isoformat()} +{W:g}d"))
    return EXIT_OK


def cmd_score(args) -> int:
    _require(args, "events", "forecast")
    fdir = Path(args.forecast)
    meta = _read_json(fdir / "forecast_meta.json")
    grid = GridSpec.from_dict(_read_json(fdir / "grid.json"))
    chosen, active = [], np.zeros(grid.n_cells, dtype=bool)
    with open(fdir / "predictions.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            fid = int(row["flat_id"])
            active[fid] = row["active"] == "1"
            if row["selected"] == "1":
                chosen.append(fid)
    sel = Selection(tuple(chosen), len(chosen) * grid.cell_area_sqft, meta["coverage_param"])
    ev = _events(args)
    counts = np.where(active, window_counts(ev, grid, meta["cutoff_day"], meta["window_days"]), 0)
    reg = StudyRegion(*meta["region"])
    rep = score(sel, counts, grid, reg.total_area_sqft, active=active)
    out = _out_dir(args)
    _write_json(out / "score.json", rep.to_dict(), "score_report")
    print(json.dumps({"pei": rep.pei, "pai": rep.pai, "hit_rate": rep.hit_rate}, sort_keys=True))
    return EXIT_OK


def _search_space(args) -> dict:
    doc = _read_json(args.space)
    if not isinstance(doc, dict) or not doc:
        raise InputError(f"{args.space}: search space must be a non-empty JSON object")
    return doc


def _cv_plan(args, ev):
    start = args.start or dt.date(2001, 3, 1)
    doy = start.timetuple().tm_yday
    return build_cv_plan((float(ev.t.min()), float(ev.t.max())), args.window_days, doy, args.epoch,
                         args.min_history_days)


def cmd_search(args) -> int:
    _require(args, "events", "space")
    ev = _events(args)
    region, options = _region(args, ev), _options(args)
    plan = _cv_plan(args, ev)
    if not plan.folds:
        raise InputError("no complete validation fold inside the data span")
    space = _search_space(args)
    sectioned = any(k in space for k in ("grid", "bo", "base"))
    base_doc = dict(space.get("base", {})) if sectioned else {}
    if args.config:
        base_doc = {**_read_json(args.config), **base_doc}
    base = HyperParams.from_dict(base_doc) if base_doc else None
    bo_seed = derive_seed(args.seed if args.seed is not None else 0, "bo")
    settings = space.get("bo_settings", {}) if sectioned else {}
    n_init = int(settings.get("n_init", args.n_init))
    n_iter = int(settings.get("n_iter", args.n_iter))

    pops = []
    if args.mode in ("grid", "merged"):
        grid_space = space.get("grid", {}) if sectioned else space
        pops.append(grid_search(grid_space, ev, plan, region, base, args.parallelism, options))
    if args.mode in ("bo", "merged"):
        bounds = space.get("bo", {}) if sectioned else space
        if base is None:
            raise InputError("BO needs base hyperparameters (--config or a 'base' section)")
        bounds = {k: tuple(float(x) for x in v) for k, v in bounds.items()}
        if any(len(v) != 2 for v in bounds.values()):
            raise InputError("BO bounds must be [lo, hi] pairs")
        pops.append(bayes_opt(bounds, ev, plan, region, base, n_init, n_iter, bo_seed, options))
    results = merge_results(*pops)
    out = _out_dir(args)
    write_results_csv(out / "results.csv", results)
    best = results[0]
    report = {
        "mode": args.mode, "n_candidates": len(results),
        "folds": [{"year": f.year, "cutoff": f.cutoff} for f in plan.folds],
        "best": {"hyperparams": best.hp.to_dict(), "fold_peis": list(best.fold_peis),
                 "mean_pei": best.mean_pei, "provenance": best.provenance, "feasible": best.feasible},
    }
    if len(results) >= 2:
        dist = pei_distribution_report(results)
    else:
        dist = {"fraction_zero_pei": float(best.mean_pei == 0), "max_pei": best.mean_pei,
                "z_score_of_max": None, "z_score_defined": False}
    report.update(dist)
    _write_json(out / "search_report.json", report, "search_report")
    return EXIT_OK


def cmd_rolling(args) -> int:
    _require(args, "events", "config", "start")
    hp, ev = _hyperparams(args), _events(args)
    region, options = _region(args, ev), _options(args)
    cutoff = _day(args, args.start) - 1
    W = args.window_days
    _, res = rolling_forecast(hp, ev, region, cutoff, W, args.windows, None, options)
    out = _out_dir(args)
    windows = []
    with open(out / "rolling.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "start_day", "end_day", "n", "n_star", "T", "hit_rate", "pai", "pei"])
        for i, (fc, rep) in enumerate(res):
            w.writerow([i, fc.cutoff, fc.cutoff + W, rep.n, rep.n_star, rep.T,
                        repr(rep.hit_rate), repr(rep.pai), repr(rep.pei)])
            windows.append({"window": i, "start_day": fc.cutoff, "end_day": fc.cutoff + W,
                            "score": rep.to_dict()})
    _write_json(out / "rolling.json", {
        "cutoff_day": cutoff, "window_days": W, "windows": windows,
        "mean_pei": float(np.mean([r.pei for _, r in res]))}, "rolling")
    return EXIT_OK


def cmd_ablate(args) -> int:
    _require(args, "events", "config")
    hp, ev = _hyperparams(args), _events(args)
    region, options = _region(args, ev), _options(args)
    plan = _cv_plan(args, ev)
    if not plan.folds:
        raise InputError("no complete validation fold inside the data span")
    res = run_ablation(hp, ev, plan, region, options,
                       baseline=KdeBaseline(args.baseline_bandwidth_ft, args.baseline_window_days))
    rows = ablation_rows(res)
    out = _out_dir(args)
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "mean_pei"] + [f"fold_{f.year}" for f in plan.folds])
        for r in rows:
            w.writerow([r["variant"], repr(r["mean_pei"])] + [repr(p) for p in r["fold_peis"]])
    _write_json(out / "ablation.json", {
        "folds": [{"year": f.year, "cutoff": f.cutoff} for f in plan.folds],
        "variants": rows}, "ablation")
    return EXIT_OK


def cmd_simulate(args) -> int:
    _require(args, "config")
    doc = _read_json(args.config)
    schemas.validate(doc, "synth_spec")
    spec = SynthSpec.from_dict(doc)
    if args.seed is not None:
        spec = SynthSpec.from_dict({**spec.to_dict(), "seed": derive_seed(args.seed, "synth")})
    if args.process == "poisson":
        ev, _ = simulate_poisson(spec)
    else:
        ev = simulate_hawkes(spec)
    out = _out_dir(args)
    write_events(out / "events.csv", ev, args.epoch, args.category or "SYNTH")
    _write_json(out / "events.spec.json", spec.to_dict(), "synth_spec")
    return EXIT_OK


def cmd_rff_check(args) -> int:
    if args.config:
        hp = _hyperparams(args)
        cfg = hp.rff_config or RffConfig(1, hp.spatial_lengthscale_ft, hp.temporal_lengthscale_days,
                                         hp.kernel_family, hp.seed)
    else:
        seed = derive_seed(args.seed, "rff") if args.seed is not None else 0
        cfg = RffConfig(1, 750.0, 7.0, "matern52", seed)
    ds = [int(v) for v in args.d_values.split(",")]
    rows = approximation_report(cfg, args.pairs, ds, n_seeds=args.seeds)
    out = _out_dir(args)
    with open(out / "rff_report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "mean_abs_error", "max_abs_error"])
        for d, m, x in rows:
            w.writerow([d, repr(float(m)), repr(float(x))])
    _write_json(out / "rff_report.json", {
        "kernel_family": cfg.kernel_family, "n_pairs": args.pairs, "n_seeds": args.seeds,
        "rows": [{"d": int(d), "mean_abs_error": float(m), "max_abs_error": float(x)} for d, m, x in rows]},
        "rff_report")
    (out / "rff_curve.svg").write_text(rff_curve_svg(rows))
    return EXIT_OK


def cmd_convert_table(args) -> int:
    rows = read_table(args.table)
    out = _out_dir(args)
    for row in rows:
        hp, meta = hyperparams_from_table_row(row)
        name = f"{meta['crime_type']}_{meta['forecast_period']}".replace(" ", "-").lower()
        _write_json(out / f"{name}.json", hp.to_dict(), "hyperparams")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--events", help="event CSV (category,date,x_ft,y_ft)")
    common.add_argument("--config", help="hyperparameter JSON (or synth spec JSON for simulate)")
    common.add_argument("--space", help="search-space JSON")
    common.add_argument("--epoch", type=_date, default=dt.date(1970, 1, 1),
                        help="day zero for event times (default 1970-01-01)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="master seed; fans out to per-component seeds")
    common.add_argument("--windows", type=int, default=1, help="rolling windows")
    common.add_argument("--allow-out-of-bounds", action="store_true",
                        help="skip the cell-area and forecast-area limits")
    common.add_argument("--start", type=_date, help="first day of the forecast window")
    common.add_argument("--window-days", type=float, default=7.0)
    common.add_argument("--region", help="study region bbox minx,miny,maxx,maxy (default: events bbox)")
    common.add_argument("--category", help="keep only this event category")
    common.add_argument("--max-train-periods", type=int, help="cap on stacked training periods")
    common.add_argument("--min-history-days", type=float, default=365.0,
                        help="skip CV folds with less training history than this")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kernelcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forecast", parents=[common], help="fit, predict and select hotspots")
    f.add_argument("--truth", help="event CSV used to colour the map and score")
    f.set_defaults(func=cmd_forecast)

    s = sub.add_parser("score", parents=[common], help="score a forecast directory against events")
    s.add_argument("--forecast", help="directory written by the forecast subcommand")
    s.set_defaults(func=cmd_score)

    se = sub.add_parser("search", parents=[common], help="crossvalidated hyperparameter search")
    se.add_argument("mode", choices=("grid", "bo", "merged"))
    se.add_argument("--n-init", type=int, default=10)
    se.add_argument("--n-iter", type=int, default=20)
    se.add_argument("--parallelism", type=int, default=1)
    se.set_defaults(func=cmd_search)

    r = sub.add_parser("rolling", parents=[common], help="fit once, score successive windows")
    r.set_defaults(func=cmd_rolling)

    a = sub.add_parser("ablate", parents=[common], help="compare model variants on the same folds")
    a.add_argument("--baseline-bandwidth-ft", type=float, default=KdeBaseline.bandwidth_ft)
    a.add_argument("--baseline-window-days", type=float, default=KdeBaseline.window_days)
    a.set_defaults(func=cmd_ablate)

    sim = sub.add_parser("simulate", parents=[common], help="generate synthetic events")
    sim.add_argument("process", choices=("poisson", "hawkes"))
    sim.set_defaults(func=cmd_simulate)

    rc = sub.add_parser("rff-check", parents=[common], help="kernel approximation error vs d")
    rc.add_argument("--d-values", default="5,50,500,1000")
    rc.add_argument("--pairs", type=int, default=200)
    rc.add_argument("--seeds", type=int, default=30)
    rc.set_defaults(func=cmd_rff_check)

    ct = sub.add_parser("convert-table", parents=[common], help="competition CSV rows to config JSON")
    ct.add_argument("--table", help="CSV in the competition-table layout (default: bundled)")
    ct.set_defaults(func=cmd_convert_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    import jsonschema

    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, EventFormatError, GridConstraintError, SelectionError,
            InsufficientHistoryError, jsonschema.ValidationError, KeyError, ValueError,
            FileNotFoundError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
