"""SSIM block matching for horizontal stereo disparity.

A left block at column ``x`` is compared with right-view blocks at
``x + d`` for ``d`` in ``[-search_range, search_range]``; the disparity is
the ``d`` with the highest SSIM. Ties prefer the smallest ``|d|``, then
negative before positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .motion import BLOCK

__all__ = [
    "C1", "C2", "DisparityField", "ssim_block", "estimate_disparity",
    "block_average_downsample",
]

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


@dataclass(frozen=True)
class DisparityField:
    disparities: np.ndarray  # (rows, cols) float, pixels
    search_range: int

    @property
    def block_rows(self) -> int:
        return self.disparities.shape[0]

    @property
    def block_cols(self) -> int:
        return self.disparities.shape[1]


def _ssim_from_stats(mu_a, mu_b, var_a, var_b, cov, c1, c2):
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim_block(a, b, c1: float = C1, c2: float = C2) -> float:
    """SSIM of two equally sized blocks using whole-block statistics."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"block shapes differ: {a.shape} vs {b.shape}")
    if c1 <= 0 or c2 <= 0:
        raise ValueError("c1 and c2 must be positive")
    mu_a, mu_b = a.mean(), b.mean()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    return float(_ssim_from_stats(mu_a, mu_b, a.var(), b.var(), cov, c1, c2))


def _candidate_order(search_range: int):
    yield 0
    for m in range(1, search_range + 1):
        yield -m
        yield m


def estimate_disparity(left, right, search_range: int = 32,
                       c1: float = C1, c2: float = C2) -> DisparityField:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.ndim != 2 or left.shape != right.shape:
        raise ValueError(f"view shapes differ: {left.shape} vs {right.shape}")
    h, w = left.shape
    rows, cols = h // BLOCK, w // BLOCK
    if rows == 0 or cols == 0:
        raise ValueError(f"view {left.shape} smaller than one block")

    lb = left[: rows * BLOCK, : cols * BLOCK].reshape(rows, BLOCK, cols, BLOCK)
    mu_l = lb.mean(axis=(1, 3))
    dl = lb - mu_l[:, None, :, None]
    var_l = (dl ** 2).mean(axis=(1, 3))
    x0 = np.arange(cols) * BLOCK

    best = np.full((rows, cols), -np.inf)
    best_d = np.zeros((rows, cols))
    rstrip = right[: rows * BLOCK]
    for d in _candidate_order(search_range):
        valid_cols = (x0 + d >= 0) & (x0 + d + BLOCK <= w)
        if not valid_cols.any():
            continue
        # shifted[:, x] = right[:, x + d] over the valid block columns
        idx = np.clip(x0[:, None] + d + np.arange(BLOCK)[None, :], 0, w - 1)
        rb = rstrip[:, idx].reshape(rows, BLOCK, cols, BLOCK)
        mu_r = rb.mean(axis=(1, 3))
        dr = rb - mu_r[:, None, :, None]
        var_r = (dr ** 2).mean(axis=(1, 3))
        cov = (dl * dr).mean(axis=(1, 3))
        s = _ssim_from_stats(mu_l, mu_r, var_l, var_r, cov, c1, c2)
        better = (s > best) & valid_cols[None, :]
        best[better] = s[better]
        best_d[better] = d
    return DisparityField(best_d, search_range)


def block_average_downsample(field, factor: int = BLOCK) -> np.ndarray:
    """Mean over non-overlapping ``factor`` x ``factor`` tiles; partial tiles dropped."""
    field = np.asarray(field, dtype=np.float64)
    h, w = field.shape
    rows, cols = h // factor, w // factor
    if rows == 0 or cols == 0:
        raise ValueError(f"field {field.shape} smaller than one {factor}x{factor} tile")
    return field[: rows * factor, : cols * factor].reshape(rows, factor, cols, factor).mean(axis=(1, 3))
