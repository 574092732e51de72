"""Hyperparameter records, config files, the table converter and seed fan-out."""
import json
import math

import pytest

from kernelcast import schemas
from kernelcast.config import (TABLE_COLUMNS, HyperParams, competition_config, derive_seed,
                               hyperparams_from_table_row, load_hyperparams, read_table,
                               save_hyperparams, table_row_from_hyperparams)
from kernelcast.geometry import GridConstraintError

BASE = dict(cell_w_ft=250, cell_h_ft=250, coverage_param=0.5, spatial_lengthscale_ft=750,
            temporal_lengthscale_days=7, rotation_rad=0.0, d=20, a=0.0, b=0.0,
            kde_bandwidth_ft=250, kde_lags=6, kde_window_days=10)


class TestHyperParams:
    def test_from_dict(self):
        hp = HyperParams.from_dict(BASE)
        assert hp.d == 20 and isinstance(hp.d, int) and hp.kernel_family == "matern52"
        assert hp.n_features == 46

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="unknown"):
            HyperParams.from_dict({**BASE, "lambda": 1})

    def test_missing_field(self):
        doc = dict(BASE)
        doc.pop("kde_lags")
        with pytest.raises(ValueError, match="missing"):
            HyperParams.from_dict(doc)

    @pytest.mark.parametrize("change,exc", [
        ({"cell_w_ft": 100}, GridConstraintError),
        ({"rotation_rad": math.pi / 2}, GridConstraintError),
        ({"coverage_param": 1.5}, ValueError),
        ({"a": -1.0}, ValueError),
        ({"kde_lags": 0}, ValueError),
        ({"kernel_family": "rbf"}, ValueError),
    ])
    def test_validate(self, change, exc):
        with pytest.raises(exc):
            HyperParams.from_dict({**BASE, **change}).validate()

    def test_no_rff_block(self):
        hp = HyperParams.from_dict({**BASE, "d": 0})
        assert hp.rff_config is None and hp.n_features == 6

    def test_file_round_trip(self, tmp_path):
        hp = HyperParams.from_dict({**BASE, "seed": 9, "kernel_family": "squared_exponential"})
        save_hyperparams(tmp_path / "hp.json", hp)
        doc = json.loads((tmp_path / "hp.json").read_text())
        schemas.validate(doc, "hyperparams")
        assert set(doc) == set(BASE) | {"seed", "kernel_family"}
        assert load_hyperparams(tmp_path / "hp.json") == hp


class TestTable:
    def test_twenty_rows(self):
        rows = read_table()
        assert len(rows) == 20
        assert {(r["crime_type"], r["forecast_period"]) for r in rows} == {
            (c, p) for c in ("ACFS", "burglary", "street", "auto") for p in ("1w", "2w", "1m", "2m", "3m")}
        assert tuple(rows[0]) == TABLE_COLUMNS

    def test_burglary_one_week(self):
        hp = competition_config("burglary", "1w")
        assert (hp.cell_w_ft, hp.cell_h_ft, hp.coverage_param) == (250, 250, 0.95)
        assert (hp.spatial_lengthscale_ft, hp.temporal_lengthscale_days, hp.d) == (750, 7, 20)
        assert (hp.kde_bandwidth_ft, hp.kde_lags, hp.kde_window_days) == (250, 6, 10)

    def test_all_rows_valid(self):
        for row in read_table():
            hyperparams_from_table_row(row)[0].validate()

    def test_row_round_trip_values(self):
        for row in read_table():
            hp, meta = hyperparams_from_table_row(row)
            back = table_row_from_hyperparams(hp, **meta)
            hp2, _ = hyperparams_from_table_row(back)
            assert hp2 == hp
            assert back["coverage"] == f"{float(row['coverage'][:-1]):g}%"

    def test_missing_row(self):
        with pytest.raises(KeyError):
            competition_config("arson", "1w")

    def test_percent_required(self):
        row = dict(read_table()[0], coverage="0.1")
        with pytest.raises(ValueError):
            hyperparams_from_table_row(row)


class TestSeeds:
    def test_fan_out(self):
        assert derive_seed(7, "rff") == derive_seed(7, "rff")
        assert len({derive_seed(7, c) for c in ("rff", "bo", "synth")}) == 3
        assert derive_seed(7, "rff") != derive_seed(8, "rff")
        assert 0 <= derive_seed(123, "bo") < 2 ** 63
