"""Random Fourier features over (x, y, t) for squared-exponential and Matern-5/2 kernels."""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

KERNEL_FAMILIES = ("matern52", "squared_exponential")


@dataclass(frozen=True)
class RffConfig:
    d: int
    spatial_lengthscale_ft: float
    temporal_lengthscale_days: float
    kernel_family: str = "matern52"
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if self.spatial_lengthscale_ft <= 0 or self.temporal_lengthscale_days <= 0:
            raise ValueError("lengthscales must be positive")
        if self.kernel_family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.kernel_family!r}")

    @property
    def lengthscales(self) -> np.ndarray:
        return np.array([self.spatial_lengthscale_ft, self.spatial_lengthscale_ft,
                         self.temporal_lengthscale_days])


@dataclass(frozen=True)
class FrequencyMatrix:
    omegas: np.ndarray  # (d, 3)
    config: RffConfig

    @property
    def d(self) -> int:
        return self.omegas.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(asdict(self.config), sort_keys=True) + "\n")
        buf.write("omega_x,omega_y,omega_t\n")
        for row in self.omegas:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FrequencyMatrix":
        lines = text.splitlines()
        cfg = RffConfig(**json.loads(lines[0].lstrip("# ")))
        om = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:] if ln.strip()])
        return cls(om.reshape(-1, 3), cfg)


def sample_frequencies(config: RffConfig) -> FrequencyMatrix:
    """Draw ``d`` frequencies from the kernel's spectral measure.

    Matern-5/2 frequencies are multivariate Student-t with 5 degrees of
    freedom: a standard normal row scaled by ``sqrt(5/u)``, ``u ~ chi2(5)``.
    """
    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal((config.d, 3))
    if config.kernel_family == "matern52":
        u = rng.chisquare(5, size=config.d)
        z = z * np.sqrt(5.0 / u)[:, None]
    om = z / config.lengthscales[None, :]
    om.setflags(write=False)
    return FrequencyMatrix(om, config)


def featurize(points, freqs: FrequencyMatrix | np.ndarray) -> np.ndarray:
    """Map (n, 3) points to the (n, 2d) feature matrix ``[cos | sin] / sqrt(d)``."""
    om = freqs.omegas if isinstance(freqs, FrequencyMatrix) else np.asarray(freqs, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != om.shape[1]:
        raise ValueError(f"points of shape {pts.shape} do not match frequencies {om.shape}")
    proj = pts @ om.T
    return np.hstack([np.cos(proj), np.sin(proj)]) / np.sqrt(om.shape[0])


def matern52(r):
    """Matern-5/2 correlation at scaled distance ``r`` (distance / lengthscale)."""
    r = np.asarray(r, dtype=float)
    s = np.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def squared_exponential(r):
    r = np.asarray(r, dtype=float)
    return np.exp(-0.5 * r * r)


def exact_kernel(delta, config: RffConfig) -> np.ndarray:
    """Closed-form kernel for (n, 3) differences under per-dimension scaling."""
    r = np.linalg.norm(np.asarray(delta, dtype=float) / config.lengthscales, axis=-1)
    return matern52(r) if config.kernel_family == "matern52" else squared_exponential(r)


def approximation_report(config: RffConfig, n_pairs: int, d_values, n_seeds: int = 1,
                         pair_seed: int = 12345, max_scaled_distance: float = 3.0):
    """Mean and max absolute kernel error of the feature map for each ``d``.

    Pairs are drawn once (from ``pair_seed``) with scaled separations up to
    ``max_scaled_distance``; frequencies are redrawn for each of ``n_seeds``
    seeds starting at ``config.seed``. Returns a list of
    ``(d, mean_abs_err, max_abs_err)`` with errors averaged over seeds.
    """
    rng = np.random.default_rng(pair_seed)
    ls = config.lengthscales
    a = rng.uniform(0, 10, size=(n_pairs, 3)) * ls
    direction = rng.standard_normal((n_pairs, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = rng.uniform(0, max_scaled_distance, size=n_pairs)
    b = a + direction * r[:, None] * ls
    exact = exact_kernel(a - b, config)
    rows = []
    for d in d_values:
        means, maxes = [], []
        for k in range(n_seeds):
            cfg = RffConfig(int(d), config.spatial_lengthscale_ft, config.temporal_lengthscale_days,
                            config.kernel_family, config.seed + k)
            fm = sample_frequencies(cfg)
            approx = np.sum(featurize(a, fm) * featurize(b, fm), axis=1)
            err = np.abs(approx - exact)
            means.append(err.mean())
            maxes.append(err.max())
        rows.append((int(d), float(np.mean(means)), float(np.mean(maxes))))
    return rows
