"""Hyperparameter records, JSON config files and the competition-table converter."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import MISSING, asdict, dataclass, fields, replace
from importlib import resources

from .geometry import GridConstraintError, check_cell_area
from .kde import KdeConfig
from .rff import KERNEL_FAMILIES, RffConfig

TABLE_COLUMNS = (
    "horizontal_ft", "vertical_ft", "coverage", "spatial_lengthscale_ft",
    "temporal_lengthscale_days", "rotation_rad", "d", "l1", "l2", "kde_bandwidth_ft",
    "kde_lags", "kde_window_days", "crime_type", "forecast_period",
)

# table column -> HyperParams field
_TABLE_TO_FIELD = {
    "horizontal_ft": "cell_w_ft",
    "vertical_ft": "cell_h_ft",
    "coverage": "coverage_param",
    "spatial_lengthscale_ft": "spatial_lengthscale_ft",
    "temporal_lengthscale_days": "temporal_lengthscale_days",
    "rotation_rad": "rotation_rad",
    "d": "d",
    "l1": "a",
    "l2": "b",
    "kde_bandwidth_ft": "kde_bandwidth_ft",
    "kde_lags": "kde_lags",
    "kde_window_days": "kde_window_days",
}

INT_FIELDS = ("d", "kde_lags", "seed")


@dataclass(frozen=True)
class HyperParams:
    """One candidate configuration. ``d = 0`` means no random-feature block."""

    cell_w_ft: float
    cell_h_ft: float
    coverage_param: float
    spatial_lengthscale_ft: float
    temporal_lengthscale_days: float
    rotation_rad: float
    d: int
    a: float
    b: float
    kde_bandwidth_ft: float
    kde_lags: int
    kde_window_days: float
    kernel_family: str = "matern52"
    seed: int = 0

    def validate(self, allow_out_of_bounds: bool = False) -> None:
        if not allow_out_of_bounds:
            check_cell_area(self.cell_w_ft, self.cell_h_ft)
        if not 0.0 <= self.coverage_param <= 1.0:
            raise ValueError(f"coverage_param {self.coverage_param} outside [0, 1]")
        if not 0.0 <= self.rotation_rad < math.pi / 2:
            raise GridConstraintError(f"rotation {self.rotation_rad} outside [0, pi/2)")
        if self.d < 0 or self.kde_lags < 1:
            raise ValueError("d must be >= 0 and kde_lags >= 1")
        if min(self.spatial_lengthscale_ft, self.temporal_lengthscale_days,
               self.kde_bandwidth_ft, self.kde_window_days) <= 0:
            raise ValueError("lengthscales, bandwidth and window must be positive")
        if self.a < 0 or self.b < 0:
            raise ValueError("penalties must be non-negative")
        if self.kernel_family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.kernel_family!r}")

    @property
    def kde_config(self) -> KdeConfig:
        return KdeConfig(self.kde_bandwidth_ft, self.kde_lags, self.kde_window_days)

    @property
    def rff_config(self) -> RffConfig | None:
        if self.d == 0:
            return None
        return RffConfig(self.d, self.spatial_lengthscale_ft, self.temporal_lengthscale_days,
                         self.kernel_family, self.seed)

    @property
    def n_features(self) -> int:
        return 2 * self.d + self.kde_lags

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown hyperparameter fields: {sorted(unknown)}")
        missing = {f.name for f in fields(cls) if f.default is MISSING} - set(d)
        if missing:
            raise ValueError(f"missing hyperparameter fields: {sorted(missing)}")
        return cls(**coerce_fields(d))


def coerce_fields(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k in INT_FIELDS:
            out[k] = int(round(float(v)))
        elif k == "kernel_family":
            out[k] = str(v)
        else:
            out[k] = float(v)
    return out


def load_hyperparams(path) -> HyperParams:
    with open(path) as fh:
        return HyperParams.from_dict(json.load(fh))


def save_hyperparams(path, hp: HyperParams) -> None:
    with open(path, "w") as fh:
        json.dump(hp.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- competition table ----------------------------------------------------

def _parse_percent(text: str) -> float:
    text = text.strip()
    if not text.endswith("%"):
        raise ValueError(f"coverage {text!r} must be a percentage")
    return float(text[:-1]) / 100.0


def _format_number(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def hyperparams_from_table_row(row: dict, kernel_family: str = "matern52",
                               seed: int = 0) -> tuple[HyperParams, dict]:
    """Convert one competition-table row into (HyperParams, {crime_type, forecast_period})."""
    vals = {}
    for col, name in _TABLE_TO_FIELD.items():
        raw = str(row[col]).strip()
        vals[name] = _parse_percent(raw) if col == "coverage" else raw
    vals["kernel_family"] = kernel_family
    vals["seed"] = seed
    meta = {"crime_type": row.get("crime_type", ""), "forecast_period": row.get("forecast_period", "")}
    return HyperParams(**coerce_fields(vals)), meta


def table_row_from_hyperparams(hp: HyperParams, crime_type: str = "", forecast_period: str = "") -> dict:
    row = {}
    for col, name in _TABLE_TO_FIELD.items():
        v = getattr(hp, name)
        if col == "coverage":
            row[col] = _format_number(round(v * 100.0, 9)) + "%"
        else:
            row[col] = _format_number(v)
    row["crime_type"] = crime_type
    row["forecast_period"] = forecast_period
    return row


def read_table(source=None) -> list[dict]:
    """Rows of a competition-style CSV; defaults to the bundled submitted configurations."""
    if source is None:
        text = resources.files("kernelcast").joinpath("data/competition_configs.csv").read_text()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    return list(csv.DictReader(io.StringIO(text)))


def competition_config(crime_type: str, forecast_period: str, **kw) -> HyperParams:
    for row in read_table():
        if row["crime_type"] == crime_type and row["forecast_period"] == forecast_period:
            return hyperparams_from_table_row(row, **kw)[0]
    raise KeyError(f"no configuration for {crime_type} {forecast_period}")


# -- seeds ----------------------------------------------------------------

def derive_seed(master_seed: int, component: str) -> int:
    """Per-component seed: first 8 bytes of sha256("<master>:<component>"), masked to 63 bits."""
    digest = hashlib.sha256(f"{int(master_seed)}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)
