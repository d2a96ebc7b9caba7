"""Bivariate generalized Gaussian model of paired motion/disparity coefficients.

The density of ``x`` in R^N is

    p(x) = |M|^(-1/2) g(x' M^-1 x)
    g(y) = beta Gamma(N/2) / ((2^(1/beta) pi alpha)^(N/2) Gamma(N/(2 beta)))
           * exp(-(y / alpha)^beta / 2)

with scatter ``M`` normalised to trace N, so ``alpha`` carries all of the
scale (scaling the data by ``c`` scales ``alpha`` by ``c**2``) and
``beta`` is the shape (1 is Gaussian, smaller is heavier tailed).

Fitting is maximum likelihood: a fixed-point iteration for ``M`` at fixed
``beta``, ``alpha`` in closed form, and a bounded scalar search over
``beta`` in [0.02, 5] on the profile likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .pyramid import SUBBAND_KEYS, PyramidDecomposition

__all__ = [
    "BETA_BOUNDS", "MIN_POINTS", "DegenerateFitError",
    "BggdParams", "BggdFit", "SubbandPairSample", "BggdFeatures",
    "density", "log_density", "sample", "fit", "chi_gof", "extract_bggd_features",
    "pair_subbands",
]

BETA_BOUNDS = (0.02, 5.0)
MIN_POINTS = 64
CHI_BINS = 32
CHI_COVERAGE = 0.995
FP_TOL = 1e-6
FP_MAX_ITER = 200


class DegenerateFitError(ValueError):
    """Samples too few, near-constant, or rank deficient to fit."""


@dataclass(frozen=True)
class BggdParams:
    alpha: float
    beta: float
    scatter: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        m = np.asarray(self.scatter, dtype=np.float64)
        object.__setattr__(self, "scatter", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("scatter must be square")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be finite and positive, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and positive, got {self.beta}")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("scatter must be symmetric")

    @property
    def dim(self) -> int:
        return self.scatter.shape[0]


@dataclass(frozen=True)
class BggdFit:
    params: BggdParams
    chi: float
    sample_count: int


@dataclass(frozen=True)
class SubbandPairSample:
    scale: int
    orientation: int
    points: np.ndarray  # (n, 2): motion coefficient, disparity coefficient


def _log_norm(p: BggdParams) -> float:
    n = p.dim
    a, b = p.alpha, p.beta
    sign, logdet = np.linalg.slogdet(p.scatter)
    if sign <= 0:
        raise ValueError("scatter must be positive definite")
    return (np.log(b) + gammaln(n / 2) - (n / 2) * (np.log(2) / b + np.log(np.pi * a))
            - gammaln(n / (2 * b)) - 0.5 * logdet)


def _quad(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    sol = np.linalg.solve(m, x.T)
    return np.einsum("ij,ji->i", x, sol)


def log_density(x, p: BggdParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != p.dim:
        raise ValueError(f"points must have {p.dim} coordinates")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite point")
    if abs(np.linalg.det(p.scatter)) == 0:
        raise ValueError("singular scatter matrix")
    y = _quad(x, p.scatter)
    out = _log_norm(p) - 0.5 * (y / p.alpha) ** p.beta
    return out[0] if single else out


def density(x, p: BggdParams):
    """Density at one point (shape ``(N,)``) or many (``(n, N)``)."""
    return np.exp(log_density(x, p))


def sample(p: BggdParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` points via the elliptical representation x = R M^(1/2) u.

    ``u`` is uniform on the unit sphere and ``(R^2 / alpha)^beta / 2`` is
    Gamma(N / (2 beta), 1) distributed.
    """
    rng = np.random.default_rng(seed)
    d = p.dim
    g = rng.standard_normal((n, d))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    t = rng.gamma(d / (2 * p.beta), 1.0, size=n)
    r = np.sqrt(p.alpha * (2 * t) ** (1 / p.beta))
    w, v = np.linalg.eigh(p.scatter)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    return (r[:, None] * u) @ root.T


def _check_points(points) -> np.ndarray:
    x = np.asarray(points.points if isinstance(points, SubbandPairSample) else points,
                   dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("expected (n, 2) points")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coefficients")
    return x


def _scatter_fixed_point(x, beta, m0):
    """ML scatter at fixed beta, trace normalised to the dimension."""
    n, d = x.shape
    m = m0
    for _ in range(FP_MAX_ITER):
        y = _quad(x, m)
        y = np.maximum(y, 1e-12 * y.mean())
        yb = y ** beta
        w = y ** (beta - 1)
        m_new = (x * w[:, None]).T @ x * (d / yb.sum())
        m_new = d * m_new / np.trace(m_new)
        m_new = 0.5 * (m_new + m_new.T)
        delta = np.abs(m_new - m).max() / np.abs(m).max()
        m = m_new
        if delta < FP_TOL:
            break
    return m


def _profile(x, beta, m0):
    """(loglik, alpha, M) maximised over alpha and M at fixed beta."""
    n, d = x.shape
    m = _scatter_fixed_point(x, beta, m0)
    y = np.maximum(_quad(x, m), 0.0)
    s = np.sum(y ** beta)
    alpha = (beta * s / (n * d)) ** (1 / beta)
    p = BggdParams(alpha, beta, m)
    ll = n * _log_norm(p) - 0.5 * np.sum((y / alpha) ** beta)
    return ll, alpha, m


def _check_degenerate(x):
    if len(x) < MIN_POINTS:
        raise DegenerateFitError(f"need at least {MIN_POINTS} points, got {len(x)}")
    s = x.T @ x / len(x)
    w = np.linalg.eigvalsh(s)
    if w[-1] <= 1e-24 or w[0] <= 1e-10 * w[-1]:
        raise DegenerateFitError(f"rank-deficient or near-constant samples (eigenvalues {w})")
    return s


def fit(samples, bins: int = CHI_BINS) -> BggdFit:
    """Maximum-likelihood BGGD fit of zero-mean 2-D samples."""
    x = _check_points(samples)
    s = _check_degenerate(x)
    m0 = 2 * s / np.trace(s)
    lo, hi = np.log(BETA_BOUNDS[0]), np.log(BETA_BOUNDS[1])
    res = optimize.minimize_scalar(
        lambda lb: -_profile(x, np.exp(lb), m0)[0],
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    beta = float(np.exp(res.x))
    _, alpha, m = _profile(x, beta, m0)
    params = BggdParams(float(alpha), beta, m)
    return BggdFit(params, chi_gof(x, params, bins), len(x))


def _support(x):
    q = np.quantile(x, [(1 - CHI_COVERAGE) / 2, (1 + CHI_COVERAGE) / 2], axis=0)
    half = np.max(np.abs(q), axis=0)
    half[half == 0] = 1.0
    return half


def chi_gof(samples, p: BggdParams, bins: int = CHI_BINS) -> float:
    """Sum of squared differences between empirical and model bin masses.

    The histogram covers a symmetric box holding the central 99.5% of each
    marginal; both masses are fractions of the total sample count.
    """
    x = _check_points(samples)
    if len(x) == 0:
        raise ValueError("no samples")
    if bins < 8:
        raise ValueError("bins must be >= 8")
    hx, hy = _support(x)
    ex = np.linspace(-hx, hx, bins + 1)
    ey = np.linspace(-hy, hy, bins + 1)
    h_emp, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[ex, ey])
    h_emp /= len(x)
    cx = 0.5 * (ex[1:] + ex[:-1])
    cy = 0.5 * (ey[1:] + ey[:-1])
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    centres = np.column_stack([gx.ravel(), gy.ravel()])
    area = (ex[1] - ex[0]) * (ey[1] - ey[0])
    h_model = (density(centres, p) * area).reshape(bins, bins)
    return float(np.sum((h_emp - h_model) ** 2))


def _center_crop(a, shape):
    h, w = shape
    y0 = (a.shape[0] - h) // 2
    x0 = (a.shape[1] - w) // 2
    return a[y0:y0 + h, x0:x0 + w]


def pair_subbands(motion_pyr: PyramidDecomposition, disp_pyr: PyramidDecomposition,
                  scale: int, theta: int) -> SubbandPairSample:
    a = motion_pyr.band(scale, theta)
    b = disp_pyr.band(scale, theta)
    if a.shape != b.shape:
        if max(abs(a.shape[0] - b.shape[0]), abs(a.shape[1] - b.shape[1])) > 1:
            raise ValueError(f"subband grids differ at scale {scale}: {a.shape} vs {b.shape}")
        common = (min(a.shape[0], b.shape[0]), min(a.shape[1], b.shape[1]))
        a, b = _center_crop(a, common), _center_crop(b, common)
    return SubbandPairSample(scale, theta, np.column_stack([a.ravel(), b.ravel()]))


@dataclass(frozen=True)
class BggdFeatures:
    """Per-frame fits for the 18 subbands in canonical order.

    Degenerate subbands carry the sentinel ``(alpha, beta) = (0, 0)`` and
    ``chi = 0`` with their ``degenerate`` flag set.
    """

    alphas: np.ndarray
    betas: np.ndarray
    chis: np.ndarray
    degenerate: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.alphas, self.betas])


def extract_bggd_features(motion_pyr: PyramidDecomposition,
                          disp_pyr: PyramidDecomposition) -> BggdFeatures:
    k = len(SUBBAND_KEYS)
    alphas, betas, chis = np.zeros(k), np.zeros(k), np.zeros(k)
    degenerate = np.zeros(k, dtype=bool)
    for i, (s, t) in enumerate(SUBBAND_KEYS):
        pts = pair_subbands(motion_pyr, disp_pyr, s, t)
        try:
            f = fit(pts)
        except DegenerateFitError:
            degenerate[i] = True
            continue
        alphas[i], betas[i], chis[i] = f.params.alpha, f.params.beta, f.chi
    return BggdFeatures(alphas, betas, chis, degenerate)
