"""Correlation and error metrics after a 4-parameter logistic mapping.

    f(x) = (tau1 - tau2) / (1 + exp((x - tau3) / |tau4|)) + tau2

The fit minimises the squared error with Nelder-Mead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.special import expit

__all__ = [
    "LogisticParams", "DegenerateFitError", "logistic", "fit_logistic",
    "lcc", "srocc", "rmse", "MetricSet", "evaluate_scores",
]

MIN_FIT_POINTS = 5
MAX_ITER = 2000
SSE_RTOL = 1e-10


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class LogisticParams:
    tau1: float
    tau2: float
    tau3: float
    tau4: float

    def __post_init__(self):
        if self.tau4 == 0:
            raise ValueError("tau4 must be nonzero")

    def as_array(self) -> np.ndarray:
        return np.array([self.tau1, self.tau2, self.tau3, self.tau4])


def logistic(x, p: LogisticParams):
    x = np.asarray(x, dtype=np.float64)
    # expit(-u) == 1 / (1 + exp(u)) without overflow
    out = (p.tau1 - p.tau2) * expit(-(x - p.tau3) / abs(p.tau4)) + p.tau2
    return float(out) if out.ndim == 0 else out


def _as_pair(a, b, min_len=2):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < min_len:
        raise ValueError(f"need at least {min_len} values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("values must be finite")
    return a, b


def _sse(theta, x, y):
    t1, t2, t3, t4 = theta
    if t4 == 0:
        return np.inf
    r = (t1 - t2) * expit(-(x - t3) / abs(t4)) + t2 - y
    return float(r @ r)


def _sse_floor(y):
    # SSE at round-off level relative to the data spread counts as zero
    return 1e-12 * float(np.sum((y - y.mean()) ** 2))


def _nelder_mead(x, y, theta0):
    """Simplex descent with restarts until the SSE stops improving."""
    best = np.asarray(theta0, dtype=np.float64)
    best_sse = _sse(best, x, y)
    floor = _sse_floor(y)
    for _ in range(5):
        res = optimize.minimize(_sse, best, args=(x, y), method="Nelder-Mead",
                                options={"maxiter": MAX_ITER, "maxfev": 2 * MAX_ITER,
                                         "xatol": 1e-12, "fatol": 0.0})
        improved = best_sse - res.fun
        if res.fun < best_sse:
            best, best_sse = res.x, res.fun
        if best_sse <= floor or improved <= SSE_RTOL * (best_sse + floor):
            break
    return best, best_sse


def fit_logistic(objective, dmos) -> LogisticParams:
    """Least-squares logistic fit of ``dmos`` against ``objective``.

    The simplex starts at (max dmos, min dmos, median objective, std
    objective), and again with tau1/tau2 swapped so that decreasing
    relations are reached as easily as increasing ones; the lower SSE wins.
    """
    x, y = _as_pair(objective, dmos)
    if len(x) < MIN_FIT_POINTS:
        raise DegenerateFitError(f"need at least {MIN_FIT_POINTS} points, got {len(x)}")
    if np.ptp(x) == 0:
        raise DegenerateFitError("objective scores are all identical")
    if np.ptp(y) == 0:
        raise DegenerateFitError("dmos values are all identical")
    init = np.array([y.max(), y.min(), np.median(x), np.std(x)])
    mirrored = init[[1, 0, 2, 3]]
    fits = [_nelder_mead(x, y, init)]
    if fits[0][1] > _sse_floor(y):
        fits.append(_nelder_mead(x, y, mirrored))
    theta = min(fits, key=lambda f: f[1])[0]
    if theta[3] == 0:
        theta[3] = np.finfo(float).tiny
    return LogisticParams(*map(float, theta))


def lcc(a, b) -> float:
    a, b = _as_pair(a, b)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("zero variance")
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))


def srocc(a, b) -> float:
    a, b = _as_pair(a, b)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("zero variance")
    return float(stats.spearmanr(a, b).statistic)


def rmse(a, b) -> float:
    a, b = _as_pair(a, b, min_len=1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class MetricSet:
    lcc: float
    srocc: float
    rmse: float
    mapping: str  # "logistic", "linear" or "none"


def evaluate_scores(predicted, dmos) -> MetricSet:
    """Metrics of predictions against dmos after the logistic mapping.

    SROCC uses the raw predictions (the mapping is monotone). Below five
    points the logistic is underdetermined and an affine least-squares map
    is used instead; undefined correlations come back as NaN.
    """
    x, y = _as_pair(predicted, dmos)
    mapping = "logistic"
    try:
        mapped = logistic(x, fit_logistic(x, y))
    except DegenerateFitError:
        if np.ptp(x) > 0 and len(x) >= 2:
            mapping = "linear"
            slope, icept = np.polyfit(x, y, 1)
            mapped = slope * x + icept
        else:
            mapping = "none"
            mapped = x
    nan = float("nan")
    try:
        r = lcc(mapped, y)
    except ValueError:
        r = nan
    try:
        s = srocc(x, y)
    except ValueError:
        s = nan
    return MetricSet(r, s, rmse(mapped, y), mapping)
