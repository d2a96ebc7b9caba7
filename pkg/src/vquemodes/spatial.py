"""Per-frame spatial quality: a NIQE-style naturalness distance.

Frames are MSCN-normalised with a 7x7 Gaussian window (sigma 7/6, C = 1).
Each patch yields 18 features per scale (GGD shape and variance of the
MSCN coefficients, then AGGD shape, mean, left and right variance for the
horizontal, vertical and two diagonal neighbour products) at full and half
resolution, 36 in total. The score is the Mahalanobis-like distance between
a pristine patch model and the frame's patch statistics; lower is more
natural.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, optimize
from scipy.special import gamma as gamma_fn

__all__ = [
    "N_FEATURES", "SpatialScore", "PristineModel", "mscn", "local_sigma",
    "ggd_fit", "aggd_fit", "niqe_features", "patch_features", "train_pristine",
    "niqe_score", "combine", "load_external_scores", "write_external_scores",
    "ExternalScoreError",
]

N_FEATURES = 36
WINDOW_RADIUS = 3
WINDOW_SIGMA = 7.0 / 6.0
MSCN_C = 1.0
DEFAULT_PATCH = 96
SHARPNESS_FRACTION = 0.75
MIN_FRAME = 16
PRISTINE_HEADER = "vquemodes-pristine v1"

_WINDOW = np.exp(-0.5 * (np.arange(-WINDOW_RADIUS, WINDOW_RADIUS + 1) / WINDOW_SIGMA) ** 2)
_WINDOW /= _WINDOW.sum()


@dataclass(frozen=True)
class SpatialScore:
    frame_index: int
    left_score: float
    right_score: float

    @property
    def combined(self) -> float:
        return combine(self.left_score, self.right_score)


def combine(left_score: float, right_score: float) -> float:
    """Frame spatial feature: mean of the two views' scores."""
    if not (math.isfinite(left_score) and math.isfinite(right_score)):
        raise ValueError("spatial scores must be finite")
    return (left_score + right_score) / 2


def _moments(img):
    mu = ndimage.correlate1d(img, _WINDOW, axis=0, mode="nearest")
    mu = ndimage.correlate1d(mu, _WINDOW, axis=1, mode="nearest")
    sq = ndimage.correlate1d(img * img, _WINDOW, axis=0, mode="nearest")
    sq = ndimage.correlate1d(sq, _WINDOW, axis=1, mode="nearest")
    return mu, np.sqrt(np.abs(sq - mu * mu))


def _centred(frame):
    # MSCN is offset invariant; centring gives exact zeros for flat input
    # and less cancellation in E[x^2] - E[x]^2
    img = np.asarray(frame, dtype=np.float64)
    return img - img.mean()


def local_sigma(frame) -> np.ndarray:
    return _moments(_centred(frame))[1]


def mscn(frame) -> np.ndarray:
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < MIN_FRAME:
        raise ValueError(f"frame must be 2-D and at least {MIN_FRAME}x{MIN_FRAME}")
    img = _centred(img)
    mu, sigma = _moments(img)
    return (img - mu) / (sigma + MSCN_C)


def _ggd_ratio(a):
    return gamma_fn(2 / a) ** 2 / (gamma_fn(1 / a) * gamma_fn(3 / a))


def _solve_shape(rho: float) -> float:
    """Invert Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)) = rho on [0.2, 10]."""
    lo, hi = 0.2, 10.0
    f = lambda a: _ggd_ratio(a) - rho  # noqa: E731
    if f(lo) >= 0:
        return lo
    if f(hi) <= 0:
        return hi
    return optimize.brentq(f, lo, hi, xtol=1e-12)


def ggd_fit(x) -> tuple[float, float]:
    """Moment-matching GGD fit: (shape, variance)."""
    x = np.ravel(x)
    var = float(np.mean(x * x))
    if var == 0:
        raise ValueError("zero-variance data")
    rho = float(np.mean(np.abs(x))) ** 2 / var
    return _solve_shape(rho), var


def aggd_fit(x) -> tuple[float, float, float, float]:
    """Asymmetric GGD fit: (shape, mean, left variance, right variance)."""
    x = np.ravel(x)
    left = x[x < 0]
    right = x[x >= 0]
    lvar = float(np.mean(left ** 2)) if left.size else 0.0
    rvar = float(np.mean(right ** 2)) if right.size else 0.0
    if lvar == 0 or rvar == 0:
        raise ValueError("AGGD needs data on both sides of zero")
    g = math.sqrt(lvar) / math.sqrt(rvar)
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (g ** 3 + 1) * (g + 1) / (g ** 2 + 1) ** 2
    shape = _solve_shape(r_norm)
    bl = math.sqrt(lvar) * math.sqrt(gamma_fn(1 / shape) / gamma_fn(3 / shape))
    br = math.sqrt(rvar) * math.sqrt(gamma_fn(1 / shape) / gamma_fn(3 / shape))
    mean = (br - bl) * gamma_fn(2 / shape) / gamma_fn(1 / shape)
    return shape, mean, lvar, rvar


def _pairwise_products(m):
    # horizontal, vertical, main diagonal, anti-diagonal neighbours
    return (m[:, :-1] * m[:, 1:], m[:-1, :] * m[1:, :],
            m[:-1, :-1] * m[1:, 1:], m[:-1, 1:] * m[1:, :-1])


def _scale_features(m) -> list[float]:
    feats = list(ggd_fit(m))
    for prod in _pairwise_products(m):
        feats.extend(aggd_fit(prod))
    return feats


def _half(img):
    h, w = img.shape
    h2, w2 = h - h % 2, w - w % 2
    return img[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))


def niqe_features(frame) -> np.ndarray:
    """36 naturalness features of a whole frame.

    Raises ValueError for a flat (degenerate) frame.
    """
    img = np.asarray(frame, dtype=np.float64)
    if np.ptp(img) == 0:
        raise ValueError("degenerate (constant) frame")
    return np.array(_scale_features(mscn(img)) + _scale_features(mscn(_half(img))))


def patch_features(frame, patch_size: int = DEFAULT_PATCH):
    """Per-patch features and sharpness over the non-overlapping patch grid.

    Returns ``(features (n, 36), sharpness (n,))``; sharpness is the mean
    local sigma inside each patch. Flat patches get NaN features.
    """
    img = np.asarray(frame, dtype=np.float64)
    if patch_size % 2 or patch_size < 2 * MIN_FRAME:
        raise ValueError(f"patch size must be even and >= {2 * MIN_FRAME}")
    h, w = img.shape
    rows, cols = h // patch_size, w // patch_size
    if rows == 0 or cols == 0:
        raise ValueError(f"frame {img.shape} smaller than one {patch_size} patch")
    m1 = mscn(img)
    sig = local_sigma(img)
    half = _half(img)
    m2 = mscn(half)
    ps2 = patch_size // 2
    feats, sharp = [], []
    for r in range(rows):
        for c in range(cols):
            sl = np.s_[r * patch_size:(r + 1) * patch_size, c * patch_size:(c + 1) * patch_size]
            sl2 = np.s_[r * ps2:(r + 1) * ps2, c * ps2:(c + 1) * ps2]
            sharp.append(float(sig[sl].mean()))
            try:
                feats.append(_scale_features(m1[sl]) + _scale_features(m2[sl2]))
            except ValueError:
                feats.append([np.nan] * N_FEATURES)
    return np.array(feats), np.array(sharp)


def sharp_patch_mask(sharpness: np.ndarray, fraction: float = SHARPNESS_FRACTION) -> np.ndarray:
    """Patches at least ``fraction`` of the frame's peak sharpness."""
    peak = sharpness.max()
    return (sharpness > 0) & (sharpness >= fraction * peak)


@dataclass(frozen=True)
class PristineModel:
    mean_vector: np.ndarray
    covariance: np.ndarray
    patch_size: int = DEFAULT_PATCH
    sharpness_fraction: float = SHARPNESS_FRACTION
    patch_count: int = 0

    def save(self, path) -> None:
        lines = [PRISTINE_HEADER, f"patch_size {self.patch_size}",
                 f"sharpness_fraction {self.sharpness_fraction!r}",
                 f"patch_count {self.patch_count}",
                 "mean " + " ".join(f"{v:.17g}" for v in self.mean_vector)]
        lines += ["cov " + " ".join(f"{v:.17g}" for v in row) for row in self.covariance]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "PristineModel":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0].strip() != PRISTINE_HEADER:
            raise ValueError(f"{path}: not a '{PRISTINE_HEADER}' file")
        fields, cov = {}, []
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            if key == "cov":
                cov.append([float(v) for v in rest.split()])
            else:
                fields[key] = rest
        try:
            mean = np.array([float(v) for v in fields["mean"].split()])
            model = cls(mean, np.array(cov), int(fields["patch_size"]),
                        float(fields["sharpness_fraction"]), int(fields["patch_count"]))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: malformed pristine model ({exc})") from None
        if mean.shape != (N_FEATURES,) or model.covariance.shape != (N_FEATURES, N_FEATURES):
            raise ValueError(f"{path}: wrong model dimensions")
        return model


def train_pristine(frames, patch_size: int = DEFAULT_PATCH,
                   sharpness_fraction: float = SHARPNESS_FRACTION) -> PristineModel:
    """Fit the pristine patch model from sharp patches of natural frames."""
    frames = list(frames)
    if len(frames) < 10:
        raise ValueError(f"need at least 10 pristine frames, got {len(frames)}")
    kept = []
    for frame in frames:
        feats, sharp = patch_features(frame, patch_size)
        sel = sharp_patch_mask(sharp, sharpness_fraction) & np.all(np.isfinite(feats), axis=1)
        kept.append(feats[sel])
    feats = np.vstack(kept)
    if len(feats) < 2:
        raise ValueError(f"too few usable patches ({len(feats)})")
    return PristineModel(feats.mean(axis=0), np.cov(feats, rowvar=False),
                         patch_size, sharpness_fraction, len(feats))


def _frame_stats(frame, patch_size):
    feats, _ = patch_features(frame, patch_size)
    feats = feats[np.all(np.isfinite(feats), axis=1)]
    if len(feats) == 0:
        raise ValueError("no usable patches in frame")
    cov = np.cov(feats, rowvar=False) if len(feats) > 1 else np.zeros((N_FEATURES, N_FEATURES))
    return feats.mean(axis=0), cov


def niqe_score(frame, model: PristineModel) -> float:
    mu, cov = _frame_stats(frame, model.patch_size)
    diff = model.mean_vector - mu
    blend = (model.covariance + cov) / 2
    blend = blend + np.eye(N_FEATURES) * (1e-6 * np.trace(blend) / N_FEATURES)
    try:
        q = float(diff @ np.linalg.solve(blend, diff))
    except np.linalg.LinAlgError:
        raise ValueError("singular blended covariance") from None
    return math.sqrt(max(q, 0.0))


class ExternalScoreError(ValueError):
    pass


def write_external_scores(path, scores) -> None:
    """``scores`` maps (video_id, frame_index) -> (left, right)."""
    lines = [f"{vid} {idx} {l!r} {r!r}" for (vid, idx), (l, r) in sorted(scores.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_external_scores(path) -> dict:
    """Read ``video_id frame_index left_score right_score`` lines.

    Every video's frame indices must run contiguously from 0.
    """
    scores = {}
    per_video = defaultdict(set)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ExternalScoreError(f"{path}:{lineno}: expected 4 fields")
        try:
            idx, left, right = int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError:
            raise ExternalScoreError(f"{path}:{lineno}: bad number") from None
        key = (parts[0], idx)
        if key in scores:
            raise ExternalScoreError(f"{path}:{lineno}: duplicate frame {key}")
        scores[key] = (left, right)
        per_video[parts[0]].add(idx)
    for vid, idxs in per_video.items():
        missing = sorted(set(range(max(idxs) + 1)) - idxs)
        if missing:
            raise ExternalScoreError(f"{path}: video {vid!r} is missing frames {missing}")
    return scores
