"""Block motion estimation on 8x8 macroblocks.

A vector ``(M_H, M_V)`` for a block at pixel ``p`` of the current frame
means the block content came from ``p - (M_H, M_V)`` in the previous
frame, so a scene translated by ``(dx, dy)`` yields ``(dx, dy)``.

Ties on SAD are broken by the smaller vector magnitude, then by row-major
candidate order (vertical offset outer, horizontal inner).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BLOCK", "MotionField", "three_step_search", "full_search", "block_sad"]

BLOCK = 8


@dataclass(frozen=True)
class MotionField:
    vectors: np.ndarray  # (rows, cols, 2) int: [..., 0] = M_H, [..., 1] = M_V
    search_range: int

    @property
    def block_rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def block_cols(self) -> int:
        return self.vectors.shape[1]

    @property
    def magnitudes(self) -> np.ndarray:
        """Motion strength M_s = sqrt(M_H^2 + M_V^2) per block."""
        v = self.vectors.astype(np.float64)
        return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)


def _check(prev, curr):
    prev = np.asarray(prev)
    curr = np.asarray(curr)
    if prev.ndim != 2 or prev.shape != curr.shape:
        raise ValueError(f"frame shapes differ: {prev.shape} vs {curr.shape}")
    if prev.shape[0] < BLOCK or prev.shape[1] < BLOCK:
        raise ValueError(f"frame {prev.shape} smaller than one {BLOCK}x{BLOCK} block")
    return prev.astype(np.int32), curr.astype(np.int32)


def _blocks(frame: np.ndarray) -> np.ndarray:
    rows, cols = frame.shape[0] // BLOCK, frame.shape[1] // BLOCK
    f = frame[: rows * BLOCK, : cols * BLOCK]
    return f.reshape(rows, BLOCK, cols, BLOCK).transpose(0, 2, 1, 3)


class _SadEvaluator:
    """SAD of every current block against ``prev`` at per-block offsets."""

    def __init__(self, prev, curr):
        self.prev = prev
        self.cur_blocks = _blocks(curr)
        rows, cols = self.cur_blocks.shape[:2]
        self.top = (np.arange(rows) * BLOCK)[:, None] + np.zeros((1, cols), dtype=int)
        self.left = np.zeros((rows, 1), dtype=int) + (np.arange(cols) * BLOCK)[None, :]
        self.k = np.arange(BLOCK)

    def __call__(self, vx: np.ndarray, vy: np.ndarray):
        """Return (sad, valid) for candidate vectors of shape (rows, cols)."""
        h, w = self.prev.shape
        ry = self.top - vy
        rx = self.left - vx
        valid = (ry >= 0) & (ry <= h - BLOCK) & (rx >= 0) & (rx <= w - BLOCK)
        ryc = np.clip(ry, 0, h - BLOCK)
        rxc = np.clip(rx, 0, w - BLOCK)
        rows_idx = ryc[..., None, None] + self.k[:, None]
        cols_idx = rxc[..., None, None] + self.k[None, :]
        ref = self.prev[rows_idx, cols_idx]
        sad = np.abs(ref - self.cur_blocks).sum(axis=(2, 3))
        return sad, valid


def _select(best_sad, best_mag2, best_vec, sad, valid, vx, vy):
    """In-place update with strict improvement under the tie-break order."""
    mag2 = vx * vx + vy * vy
    better = valid & ((sad < best_sad) | ((sad == best_sad) & (mag2 < best_mag2)))
    best_sad[better] = sad[better]
    best_mag2[better] = mag2[better]
    best_vec[..., 0][better] = vx[better]
    best_vec[..., 1][better] = vy[better]


def full_search(prev, curr, search_range: int = 7) -> MotionField:
    """Exhaustive SAD minimisation over the +-search_range window."""
    prev, curr = _check(prev, curr)
    ev = _SadEvaluator(prev, curr)
    shape = ev.top.shape
    best_sad = np.full(shape, np.iinfo(np.int64).max, dtype=np.int64)
    best_mag2 = np.zeros(shape, dtype=np.int64)
    best_vec = np.zeros(shape + (2,), dtype=np.int64)
    for vy in range(-search_range, search_range + 1):
        for vx in range(-search_range, search_range + 1):
            cvx = np.full(shape, vx)
            cvy = np.full(shape, vy)
            sad, valid = ev(cvx, cvy)
            _select(best_sad, best_mag2, best_vec, sad, valid, cvx, cvy)
    return MotionField(best_vec, search_range)


def three_step_search(prev, curr, search_range: int = 7) -> MotionField:
    """Three-step (logarithmic) search: steps 4, 2, 1 for the default range 7.

    Each step evaluates the 3x3 pattern around the current best at the
    current step size; out-of-frame candidates are skipped.
    """
    prev, curr = _check(prev, curr)
    if search_range < 1:
        raise ValueError("search_range must be >= 1")
    ev = _SadEvaluator(prev, curr)
    shape = ev.top.shape
    center = np.zeros(shape + (2,), dtype=np.int64)
    step = 1 << (int(search_range).bit_length() - 1)  # 4 for 7, 8 for 15
    while step >= 1:
        best_sad = np.full(shape, np.iinfo(np.int64).max, dtype=np.int64)
        best_mag2 = np.zeros(shape, dtype=np.int64)
        best_vec = center.copy()
        for oy in (-1, 0, 1):
            for ox in (-1, 0, 1):
                cvx = center[..., 0] + ox * step
                cvy = center[..., 1] + oy * step
                sad, valid = ev(cvx, cvy)
                valid &= (np.abs(cvx) <= search_range) & (np.abs(cvy) <= search_range)
                _select(best_sad, best_mag2, best_vec, sad, valid, cvx, cvy)
        center = best_vec
        step //= 2
    return MotionField(center, search_range)


def block_sad(prev, curr, field: MotionField) -> np.ndarray:
    """Per-block SAD achieved by ``field``."""
    prev, curr = _check(prev, curr)
    sad, valid = _SadEvaluator(prev, curr)(field.vectors[..., 0], field.vectors[..., 1])
    if not valid.all():
        raise ValueError("field contains out-of-frame vectors")
    return sad
