"""Synthetic event streams with known intensity: inhomogeneous Poisson and Hawkes."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .events import EventSet
from .geometry import StudyRegion
from .rff import featurize


@dataclass(frozen=True)
class GaussianBump:
    """Stationary spatial bump contributing ``rate_per_day`` expected events per day."""

    rate_per_day: float
    center_x: float
    center_y: float
    scale_ft: float


@dataclass(frozen=True)
class RffField:
    """Log-linear intensity ``scale * exp(Phi(s - offset) @ beta)`` in the random-feature span."""

    omegas: np.ndarray
    beta: np.ndarray
    scale: float
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def log_value(self, x, y, t) -> np.ndarray:
        pts = np.column_stack([np.asarray(x, float) - self.offset[0],
                               np.asarray(y, float) - self.offset[1],
                               np.asarray(t, float) - self.offset[2]])
        return featurize(pts, self.omegas) @ self.beta

    def __call__(self, x, y, t) -> np.ndarray:
        return self.scale * np.exp(self.log_value(x, y, t))

    def per_dim_lipschitz(self) -> np.ndarray:
        """Bound on |d log-intensity / d coordinate| for x, y, t."""
        d = self.omegas.shape[0]
        amp = np.hypot(self.beta[:d], self.beta[d:]) / math.sqrt(d)
        return amp @ np.abs(self.omegas)


@dataclass(frozen=True)
class SynthSpec:
    region: StudyRegion
    horizon_days: float
    bumps: tuple[GaussianBump, ...] = ()
    constant_rate: float = 0.0  # events per sq ft per day
    rff_field: RffField | None = None
    branching_ratio: float = 0.0
    trigger_scale_ft: float = 200.0
    trigger_time_days: float = 7.0
    seed: int = 0
    start_day: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.branching_ratio < 1.0:
            raise ValueError(f"branching ratio {self.branching_ratio} must lie in [0, 1)")
        if self.horizon_days <= 0:
            raise ValueError("horizon must be positive")

    def to_dict(self) -> dict:
        r = self.region
        out = {
            "region": [r.min_x, r.min_y, r.max_x, r.max_y],
            "horizon_days": self.horizon_days,
            "start_day": self.start_day,
            "bumps": [[b.rate_per_day, b.center_x, b.center_y, b.scale_ft] for b in self.bumps],
            "constant_rate": self.constant_rate,
            "branching_ratio": self.branching_ratio,
            "trigger_scale_ft": self.trigger_scale_ft,
            "trigger_time_days": self.trigger_time_days,
            "seed": self.seed,
        }
        if self.rff_field is not None:
            f = self.rff_field
            out["rff_field"] = {"omegas": f.omegas.tolist(), "beta": f.beta.tolist(),
                                "scale": f.scale, "offset": list(f.offset)}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        rff = None
        if d.get("rff_field"):
            f = d["rff_field"]
            rff = RffField(np.array(f["omegas"], float), np.array(f["beta"], float),
                           float(f["scale"]), tuple(f.get("offset", (0.0, 0.0, 0.0))))
        return cls(
            region=StudyRegion(*d["region"]),
            horizon_days=float(d["horizon_days"]),
            bumps=tuple(GaussianBump(*b) for b in d.get("bumps", [])),
            constant_rate=float(d.get("constant_rate", 0.0)),
            rff_field=rff,
            branching_ratio=float(d.get("branching_ratio", 0.0)),
            trigger_scale_ft=float(d.get("trigger_scale_ft", 200.0)),
            trigger_time_days=float(d.get("trigger_time_days", 7.0)),
            seed=int(d.get("seed", 0)),
            start_day=float(d.get("start_day", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def background_intensity(spec: SynthSpec):
    """Callable (x, y, t) -> events per sq ft per day; zero outside region and horizon."""
    reg = spec.region

    def rho(x, y, t):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        t = np.asarray(t, float)
        val = np.full(np.broadcast(x, y, t).shape, spec.constant_rate, dtype=float)
        for b in spec.bumps:
            r2 = (x - b.center_x) ** 2 + (y - b.center_y) ** 2
            val = val + b.rate_per_day * np.exp(-r2 / (2 * b.scale_ft ** 2)) / (2 * np.pi * b.scale_ft ** 2)
        if spec.rff_field is not None:
            xb, yb, tb = np.broadcast_arrays(x, y, t)
            val = val + spec.rff_field(xb.ravel(), yb.ravel(), tb.ravel()).reshape(val.shape)
        inside = reg.contains(x, y) & (t > spec.start_day) & (t <= spec.start_day + spec.horizon_days)
        return np.where(inside, val, 0.0)

    return rho


def _static_bound(spec: SynthSpec) -> float:
    return spec.constant_rate + sum(b.rate_per_day / (2 * np.pi * b.scale_ft ** 2) for b in spec.bumps)


def _blocks(spec: SynthSpec):
    """Space-time blocks with per-block intensity upper bounds for exact thinning."""
    reg = spec.region
    lo = np.array([reg.min_x, reg.min_y, spec.start_day])
    ext = np.array([reg.width, reg.height, spec.horizon_days])
    static = _static_bound(spec)
    f = spec.rff_field
    if f is None:
        return [(lo, ext, static)]
    lip = f.per_dim_lipschitz()
    # split so the log-bound slack per block stays near 0.5
    n = np.clip(np.ceil(lip * ext / 0.5), 1, 400).astype(int)
    if n.prod() > 2_000_000:
        n = np.maximum(1, (n * (2_000_000 / n.prod()) ** (1 / 3)).astype(int))
    size = ext / n
    grids = np.meshgrid(*[np.arange(k) for k in n], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    centers = lo + (idx + 0.5) * size
    slack = float(lip @ (size / 2))
    bounds = static + f.scale * np.exp(f.log_value(centers[:, 0], centers[:, 1], centers[:, 2]) + slack)
    return [(lo + i * size, size, float(bd)) for i, bd in zip(idx, bounds)]


def _thin(spec: SynthSpec, rng: np.random.Generator) -> EventSet:
    rho = background_intensity(spec)
    parts = []
    for corner, size, bound in _blocks(spec):
        if bound <= 0:
            continue
        m = rng.poisson(bound * size.prod())
        if m == 0:
            continue
        pts = corner + rng.uniform(size=(m, 3)) * size
        # uniform draws are in [0, 1); flip time so it lands in (lo, hi]
        pts[:, 2] = corner[2] + size[2] - (pts[:, 2] - corner[2])
        u = rng.uniform(size=m)
        keep = u * bound < rho(pts[:, 0], pts[:, 1], pts[:, 2])
        parts.append(EventSet(pts[keep, 2], pts[keep, 0], pts[keep, 1]))
    return EventSet.concat(parts)


def simulate_poisson(spec: SynthSpec):
    """Thinning sampler for the background intensity; returns (events, intensity)."""
    rng = np.random.default_rng(spec.seed)
    ev = _thin(spec, rng)
    order = np.argsort(ev.t, kind="stable")
    return ev.select(order), background_intensity(spec)


def simulate_hawkes(spec: SynthSpec, return_parents: bool = False):
    """Branching construction: background immigrants plus Poisson(branching_ratio) offspring.

    Offspring are displaced by an isotropic Gaussian (``trigger_scale_ft``)
    and an exponential delay (mean ``trigger_time_days``). Offspring landing
    outside the region or horizon are discarded along with their descendants.
    """
    if not spec.branching_ratio < 1.0:
        raise ValueError("supercritical branching ratio")
    rng = np.random.default_rng(spec.seed)
    imm = _thin(spec, rng)
    t, x, y = [imm.t], [imm.x], [imm.y]
    parent = [np.full(len(imm), -1)]
    gen_t, gen_x, gen_y = imm.t, imm.x, imm.y
    gen_idx = np.arange(len(imm))
    total = len(imm)
    end = spec.start_day + spec.horizon_days
    while spec.branching_ratio > 0 and len(gen_t):
        kids = rng.poisson(spec.branching_ratio, size=len(gen_t))
        src = np.repeat(np.arange(len(gen_t)), kids)
        if src.size == 0:
            break
        ct = gen_t[src] + rng.exponential(spec.trigger_time_days, size=src.size)
        cx = gen_x[src] + rng.normal(0.0, spec.trigger_scale_ft, size=src.size)
        cy = gen_y[src] + rng.normal(0.0, spec.trigger_scale_ft, size=src.size)
        keep = spec.region.contains(cx, cy) & (ct <= end)
        ct, cx, cy, src = ct[keep], cx[keep], cy[keep], src[keep]
        t.append(ct)
        x.append(cx)
        y.append(cy)
        parent.append(gen_idx[src])
        gen_idx = total + np.arange(len(ct))
        total += len(ct)
        gen_t, gen_x, gen_y = ct, cx, cy
    ev = EventSet(np.concatenate(t), np.concatenate(x), np.concatenate(y))
    par = np.concatenate(parent)
    if return_parents:
        return ev, par
    order = np.argsort(ev.t, kind="stable")
    return ev.select(order)
