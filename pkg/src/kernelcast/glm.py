"""Elastic-net penalised Poisson regression on KDE and random-feature blocks.

The fitted model maximises

    sum_i [o_i * eta_i - exp(eta_i)] - a * (|beta|_1 + |gamma|_1) - b * (|beta|_2^2 + |gamma|_2^2)

with ``eta_i = KDE_i @ gamma + Phi_i @ beta`` by proximal gradient ascent.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

ETA_CLAMP = 30.0


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class DesignMatrix:
    kde_block: np.ndarray   # (n, p)
    rff_block: np.ndarray   # (n, 2d)
    counts: np.ndarray      # (n,)
    period: np.ndarray | None = None
    flat_id: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.counts)
        kde = np.asarray(self.kde_block, dtype=float).reshape(n, -1)
        rff = np.asarray(self.rff_block, dtype=float).reshape(n, -1)
        counts = np.asarray(self.counts)
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "kde_block", kde)
        object.__setattr__(self, "rff_block", rff)
        object.__setattr__(self, "counts", counts.astype(float))

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def p(self) -> int:
        return self.kde_block.shape[1]

    @property
    def n_rff(self) -> int:
        return self.rff_block.shape[1]

    @property
    def X(self) -> np.ndarray:
        return np.hstack([self.kde_block, self.rff_block])


@dataclass(frozen=True)
class ModelParams:
    gamma: np.ndarray
    beta: np.ndarray
    a: float = 0.0
    b: float = 0.0
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).ravel())
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())
        if self.a < 0 or self.b < 0:
            raise ValueError("penalty weights must be non-negative")

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta])

    @classmethod
    def zeros(cls, p: int, n_rff: int, a: float = 0.0, b: float = 0.0) -> "ModelParams":
        return cls(np.zeros(p), np.zeros(n_rff), a, b)


@dataclass
class OptimizerConfig:
    max_epochs: int = 200
    tol_per_row: float = 1e-6
    standardize: bool = True
    fit_intercept: bool = False
    max_backtracks: int = 60


@dataclass
class FitReport:
    objective: float
    iterations: int
    converged: bool
    grad_max_norm: float
    diverged: bool = False
    history: list = field(default_factory=list)


def _linear_predictor(params: ModelParams, design: DesignMatrix) -> np.ndarray:
    if params.gamma.shape[0] != design.p or params.beta.shape[0] != design.n_rff:
        raise ValueError(f"parameter sizes ({params.gamma.size}, {params.beta.size}) do not match "
                         f"design blocks ({design.p}, {design.n_rff})")
    return design.kde_block @ params.gamma + design.rff_block @ params.beta + params.intercept


def _clamped(eta):
    clipped = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return clipped, bool(np.any(clipped != eta))


def objective(params: ModelParams, design: DesignMatrix) -> float:
    eta, _ = _clamped(_linear_predictor(params, design))
    loglik = float(np.dot(design.counts, eta) - np.exp(eta).sum())
    th = params.theta
    return loglik - params.a * float(np.abs(th).sum()) - params.b * float(np.dot(th, th))


def gradient(params: ModelParams, design: DesignMatrix):
    """(d_gamma, d_beta): smooth gradient minus ``a * sign(theta)`` with sign(0) = 0."""
    eta, _ = _clamped(_linear_predictor(params, design))
    resid = design.counts - np.exp(eta)
    th = params.theta
    g = design.X.T @ resid - 2.0 * params.b * th - params.a * np.sign(th)
    return g[:design.p], g[design.p:]


def predict(params: ModelParams, design_rows: DesignMatrix) -> np.ndarray:
    eta, _ = _clamped(_linear_predictor(params, design_rows))
    return np.exp(eta)


# -- optimizer ------------------------------------------------------------

def _soft(z, thr):
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


class _Problem:
    """Penalised objective in (optionally) column-scaled coordinates.

    The last coordinate is an unpenalised intercept when ``intercept`` is set.
    """

    def __init__(self, X, counts, a, b, intercept):
        self.X = X
        self.o = counts
        self.a = a
        self.b = b
        self.intercept = intercept
        self.pen = np.ones(X.shape[1])
        if intercept:
            self.pen[-1] = 0.0

    def smooth(self, th):
        eta = self.X @ th
        eta_c = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        mu = np.exp(eta_c)
        val = float(np.dot(self.o, eta_c) - mu.sum()) - self.b * float(np.dot(self.pen * th, th))
        grad = self.X.T @ (self.o - mu) - 2.0 * self.b * self.pen * th
        return val, grad, bool(np.any(eta_c != eta))

    def nonsmooth(self, th):
        return self.a * float(np.abs(self.pen * th).sum())

    def prox(self, z, step):
        return np.where(self.pen > 0, _soft(z, step * self.a), z)

    def stationarity(self, th, grad):
        """Max-norm of the minimal-norm ascent direction of the full objective."""
        a = self.a * self.pen
        g = np.where(th > 0, grad - a, np.where(th < 0, grad + a, _soft(grad, a)))
        return float(np.max(np.abs(g))) if g.size else 0.0


def fit(design: DesignMatrix, a: float = 0.0, b: float = 0.0,
        optimizer_config: OptimizerConfig | None = None,
        init: ModelParams | None = None) -> tuple[ModelParams, FitReport]:
    """Proximal gradient ascent with Barzilai-Borwein steps and backtracking.

    Each accepted step satisfies the quadratic-model condition of the smooth
    part, which guarantees the penalised objective never decreases.
    """
    cfg = optimizer_config or OptimizerConfig()
    if design.n == 0:
        raise ValueError("empty design")
    X = design.X
    scale = np.ones(X.shape[1])
    if cfg.standardize and design.p:
        sd = design.kde_block.std(axis=0, ddof=1) if design.n > 1 else np.ones(design.p)
        sd = np.where(np.isfinite(sd) & (sd > 0), sd, 1.0)
        scale[:design.p] = sd
    Xs = X / scale
    if cfg.fit_intercept:
        Xs = np.hstack([Xs, np.ones((design.n, 1))])
    prob = _Problem(Xs, design.counts, a, b, cfg.fit_intercept)

    th = np.zeros(Xs.shape[1])
    if init is not None:
        th[:X.shape[1]] = init.theta * scale
        if cfg.fit_intercept:
            th[-1] = init.intercept
    f, g, clamped = prob.smooth(th)
    F = f - prob.nonsmooth(th)
    if not np.isfinite(F):
        raise NumericalError("objective is not finite at the starting point")
    history = [F]
    tol = cfg.tol_per_row * design.n

    # first step from a curvature bound of the Poisson Hessian at the start
    mu0 = np.exp(np.clip(Xs @ th, -ETA_CLAMP, ETA_CLAMP))
    lip = float(np.sum(mu0[:, None] * Xs * Xs)) + 2.0 * b
    step = 1.0 / max(lip, 1e-12)

    converged = False
    it = 0
    gnorm = prob.stationarity(th, g)
    while it < cfg.max_epochs:
        if gnorm <= tol:
            converged = True
            break
        it += 1
        accepted = False
        for _ in range(cfg.max_backtracks):
            th_new = prob.prox(th + step * g, step)
            diff = th_new - th
            f_new, g_new, clamped = prob.smooth(th_new)
            if np.isfinite(f_new) and f_new >= f + float(np.dot(g, diff)) - np.dot(diff, diff) / (2 * step):
                F_new = f_new - prob.nonsmooth(th_new)
                if F_new >= F:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
        s_vec = diff
        y_vec = g_new - g
        th, f, g, F = th_new, f_new, g_new, F_new
        history.append(F)
        gnorm = prob.stationarity(th, g)
        # BB1 step for a concave objective; fall back to growing the last step
        sy = -float(np.dot(s_vec, y_vec))
        ss = float(np.dot(s_vec, s_vec))
        step = ss / sy if sy > 1e-300 and ss > 0 else step * 2.0
    if gnorm <= tol:
        converged = True
    if not np.isfinite(F):
        raise NumericalError(f"objective became non-finite after {it} epochs")

    coef = th[:X.shape[1]] / scale
    params = ModelParams(coef[:design.p], coef[design.p:], a, b,
                         float(th[-1]) if cfg.fit_intercept else 0.0)
    report = FitReport(objective=F, iterations=it, converged=converged,
                       grad_max_norm=gnorm, diverged=clamped, history=history)
    return params, report


# -- persistence ----------------------------------------------------------

def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def model_to_dict(params: ModelParams, report: FitReport | None = None, seed: int | None = None,
                  config: dict | None = None) -> dict:
    out = {
        "gamma": [float(v) for v in params.gamma],
        "beta": [float(v) for v in params.beta],
        "intercept": float(params.intercept),
        "a": float(params.a),
        "b": float(params.b),
        "seed": seed,
        "config_hash": config_hash(config or {}),
    }
    if report is not None:
        r = asdict(report)
        r.pop("history")
        out["fit_report"] = r
    return out


def model_from_dict(d: dict) -> ModelParams:
    return ModelParams(np.array(d["gamma"], dtype=float), np.array(d["beta"], dtype=float),
                       float(d["a"]), float(d["b"]), float(d.get("intercept", 0.0)))
