"""Real steerable pyramid built in the Fourier domain.

Three scales, six orientations (0, 30, ..., 150 degrees). Radial masks are
raised-cosine octave bands, angular masks are ``cos^5`` lobes, and all FFTs
use orthonormal scaling, so the transform is a tight frame: the energy of
the residuals plus all subbands equals the input energy, and
:func:`reconstruct` inverts :func:`decompose`.

Orientation ``theta`` selects spatial frequencies whose direction is
``theta`` from the horizontal frequency axis; a pattern varying along x
(vertical stripes) lands in the 0-degree band.

Inputs are zero-padded once, at the bottom/right, to a multiple of 8 so
that every stage has even dimensions and halves exactly. The band at scale
``s`` has logical size ``ceil(input / 2**(s-1))``;
:meth:`PyramidDecomposition.band` returns it cropped to that size.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

__all__ = [
    "N_SCALES", "N_ORIENTATIONS", "ORIENTATIONS_DEG", "SUBBAND_KEYS", "flat_index",
    "PyramidDecomposition", "decompose", "reconstruct",
]

N_SCALES = 3
N_ORIENTATIONS = 6
ORIENTATIONS_DEG = tuple(30 * b for b in range(N_ORIENTATIONS))
# canonical order: k = 6 * (scale - 1) + theta / 30
SUBBAND_KEYS = tuple((s, t) for s in range(1, N_SCALES + 1) for t in ORIENTATIONS_DEG)
MIN_SIZE = 16


def flat_index(scale: int, theta_deg: int) -> int:
    if scale not in range(1, N_SCALES + 1) or theta_deg not in ORIENTATIONS_DEG:
        raise KeyError((scale, theta_deg))
    return N_ORIENTATIONS * (scale - 1) + theta_deg // 30


@dataclass
class PyramidDecomposition:
    subbands: dict  # (scale, theta_deg) -> 2-D float array at the padded stage size
    residual_high: np.ndarray
    residual_low: np.ndarray
    input_shape: tuple

    def band(self, scale: int, theta_deg: int) -> np.ndarray:
        """Subband cropped to its logical (unpadded) size."""
        h, w = self.logical_shape(scale)
        return self.subbands[(scale, theta_deg)][:h, :w]

    def logical_shape(self, scale: int) -> tuple:
        f = 2 ** (scale - 1)
        h, w = self.input_shape
        return (-(-h // f), -(-w // f))

    def __add__(self, other: "PyramidDecomposition") -> "PyramidDecomposition":
        if self.input_shape != other.input_shape:
            raise ValueError("decompositions of different input shapes")
        return PyramidDecomposition(
            {k: v + other.subbands[k] for k, v in self.subbands.items()},
            self.residual_high + other.residual_high,
            self.residual_low + other.residual_low,
            self.input_shape)

    def map(self, fn) -> "PyramidDecomposition":
        """Apply ``fn`` to every coefficient array (subbands and residuals)."""
        return PyramidDecomposition(
            {k: fn(v) for k, v in self.subbands.items()}, fn(self.residual_high),
            fn(self.residual_low), self.input_shape)

    def energy(self) -> float:
        total = float(np.sum(self.residual_high ** 2) + np.sum(self.residual_low ** 2))
        return total + sum(float(np.sum(v ** 2)) for v in self.subbands.values())


def _ramp(log_r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Squared raised cosine: 0 below ``lo``, 1 above ``hi`` (in log2 radius)."""
    t = np.clip((log_r - lo) / (hi - lo), 0.0, 1.0)
    return np.sin(0.5 * np.pi * t) ** 2


class _Grid:
    """Polar frequency coordinates for a centred (fftshifted) spectrum."""

    def __init__(self, shape):
        h, w = shape
        yr = np.linspace(-1, 1, h + 1)[:-1]
        xr = np.linspace(-1, 1, w + 1)[:-1]
        xx, yy = np.meshgrid(xr, yr)
        self.angle = np.arctan2(yy, xx)
        rad = np.hypot(xx, yy)
        with np.errstate(divide="ignore"):
            self.log_rad = np.log2(rad)
        self.log_rad[rad == 0] = -np.inf  # DC goes entirely to the low-pass path
        self.dc = rad == 0

    def hi_lo(self, lo: float, hi: float):
        r = _ramp(self.log_rad, lo, hi)
        return np.sqrt(r), np.sqrt(1.0 - r)

    def angle_masks(self):
        order = N_ORIENTATIONS - 1
        const = (2 ** (2 * order)) * factorial(order) ** 2 / (
            N_ORIENTATIONS * factorial(2 * order))
        masks = []
        for b in range(N_ORIENTATIONS):
            m = np.sqrt(const) * np.cos(self.angle - np.pi * b / N_ORIENTATIONS) ** order
            m[self.dc] = 0.0
            masks.append(m)
        return masks


def _fft(x):
    return np.fft.fftshift(np.fft.fft2(x, norm="ortho"))


def _ifft(X):
    return np.real(np.fft.ifft2(np.fft.ifftshift(X), norm="ortho"))


def _pad_to(x, multiple):
    h, w = x.shape
    return np.pad(x, ((0, -h % multiple), (0, -w % multiple)))


def _crop_box(shape):
    # keeps DC at the centre index of the half-size (possibly odd) spectrum
    h, w = shape
    y0 = h // 2 - (h // 2) // 2
    x0 = w // 2 - (w // 2) // 2
    return slice(y0, y0 + h // 2), slice(x0, x0 + w // 2)


# (-i)^order makes the odd-order oriented filters real-valued in space
_BAND_CONST = (-1j) ** (N_ORIENTATIONS - 1)


def decompose(field, scales: int = N_SCALES, orientations: int = N_ORIENTATIONS) -> PyramidDecomposition:
    if scales != N_SCALES or orientations != N_ORIENTATIONS:
        raise ValueError("pyramid is fixed at 3 scales x 6 orientations")
    x = np.asarray(field, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("field must be 2-D")
    if min(x.shape) < MIN_SIZE:
        raise ValueError(f"field {x.shape} smaller than {MIN_SIZE}x{MIN_SIZE}")
    if not np.all(np.isfinite(x)):
        raise ValueError("field contains non-finite values")

    X = _fft(_pad_to(x, 2 ** N_SCALES))
    g = _Grid(X.shape)
    hi0, lo0 = g.hi_lo(-1.0, 0.0)
    residual_high = _ifft(X * hi0)
    P = X * lo0

    subbands = {}
    for s in range(1, N_SCALES + 1):
        g = _Grid(P.shape)
        him, lom = g.hi_lo(-2.0, -1.0)
        for b, amask in enumerate(g.angle_masks()):
            subbands[(s, ORIENTATIONS_DEG[b])] = _ifft(_BAND_CONST * P * amask * him)
        ry, rx = _crop_box(P.shape)
        P = (P * lom)[ry, rx]
    return PyramidDecomposition(subbands, residual_high, _ifft(P), x.shape)


def reconstruct(p: PyramidDecomposition) -> np.ndarray:
    missing = [k for k in SUBBAND_KEYS if k not in p.subbands]
    if missing:
        raise KeyError(f"missing subbands: {missing}")
    P = _fft(np.asarray(p.residual_low, dtype=np.float64))
    for s in range(N_SCALES, 0, -1):
        shape = p.subbands[(s, 0)].shape
        g = _Grid(shape)
        him, lom = g.hi_lo(-2.0, -1.0)
        up = np.zeros(shape, dtype=complex)
        ry, rx = _crop_box(shape)
        up[ry, rx] = P
        P = up * lom
        for b, amask in enumerate(g.angle_masks()):
            P += _fft(p.subbands[(s, ORIENTATIONS_DEG[b])]) * np.conj(_BAND_CONST) * amask * him
    g = _Grid(P.shape)
    hi0, lo0 = g.hi_lo(-1.0, 0.0)
    X = P * lo0 + _fft(p.residual_high) * hi0
    h, w = p.input_shape
    return _ifft(X)[:h, :w]
