"""Epsilon-SVR with an RBF kernel, trained by SMO on the dual.

The dual is written over ``2l`` variables ``a`` (the first ``l`` pair with
``+1``, the last ``l`` with ``-1``)::

    min  1/2 a' Q a + p' a   s.t.  y' a = 0,  0 <= a <= C
    Q[s, t] = y_s y_t K(x_s, x_t),  p = [eps - z, eps + z]

Working pairs are chosen as the maximal violating pair (first index on
ties). The regression coefficients are ``a[:l] - a[l:]`` and the model is
``f(x) = sum_j coef_j K(x_j, x) + bias``.

Features are min-max scaled to [0, 1] with constants from the training
rows only; constant columns map to 0.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TrainingSet", "SvrModel", "train", "predict", "save_model", "load_model",
    "dual_objective", "grid_search", "ModelFormatError", "ChecksumError", "VersionError",
]

MODEL_HEADER = "vquemodes-svr"
MODEL_VERSION = 1
DEFAULT_C = 100.0


class ModelFormatError(ValueError):
    pass


class ChecksumError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


@dataclass
class TrainingSet:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    row_ids: list | None = None  # provenance, e.g. (video_id, frame_index)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if not np.all(np.isfinite(self.labels)):
            raise ValueError("labels must be finite")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")


@dataclass
class SvrModel:
    support_vectors: np.ndarray  # (k, d), already normalised
    dual_coeffs: np.ndarray  # (k,)
    bias: float
    gamma: float
    C: float
    epsilon: float
    norm_min: np.ndarray
    norm_scale: np.ndarray
    constant: bool = False
    n_iter: int = 0
    objective_history: list = field(default_factory=list, repr=False)
    support_index: np.ndarray | None = field(default=None, repr=False)  # training rows, not persisted

    @property
    def dim(self) -> int:
        return len(self.norm_min)

    def normalise(self, x: np.ndarray) -> np.ndarray:
        return (x - self.norm_min) * self.norm_scale

    def predict(self, features) -> np.ndarray | float:
        return predict(self, features)


def _rbf(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2 * a @ b.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


def _minmax(x: np.ndarray):
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    scale = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
    return lo, scale


class _KernelRows:
    """Kernel rows on demand with a small LRU cache."""

    def __init__(self, x, gamma, capacity=2048):
        self.x = x
        self.gamma = gamma
        self.sq = np.sum(x * x, axis=1)
        self.cache: OrderedDict = OrderedDict()
        self.capacity = capacity
        self.full = _rbf(x, x, gamma) if len(x) <= 4000 else None

    def __call__(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        row = self.cache.get(i)
        if row is None:
            d2 = self.sq + self.sq[i] - 2 * self.x @ self.x[i]
            row = np.exp(-self.gamma * np.maximum(d2, 0.0))
            self.cache[i] = row
            if len(self.cache) > self.capacity:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return row


def dual_objective(coef: np.ndarray, kernel: np.ndarray, labels: np.ndarray, epsilon: float) -> float:
    """Dual objective (minimisation form) in terms of the coefficients."""
    return float(0.5 * coef @ kernel @ coef + epsilon * np.abs(coef).sum() - labels @ coef)


def default_epsilon(labels) -> float:
    return 0.1 * float(np.std(labels))


def default_gamma(normalised: np.ndarray) -> float:
    var = float(np.var(normalised))
    return 1.0 / (normalised.shape[1] * var) if var > 0 else 1.0


def train(data: TrainingSet, C: float = DEFAULT_C, epsilon: float | None = None,
          gamma: float | None = None, tol: float = 1e-3, max_iter: int = 10_000_000,
          debug: bool = False) -> SvrModel:
    """Fit an epsilon-SVR; ``epsilon``/``gamma`` default to data-driven values.

    With ``debug=True`` the dual objective is recorded after every update
    in ``objective_history``.
    """
    x, z = data.features, data.labels
    l, d = x.shape
    if l < 2:
        raise ValueError("need at least 2 training rows")
    if C <= 0:
        raise ValueError("C must be positive")
    lo, scale = _minmax(x)
    xn = (x - lo) * scale
    eps = default_epsilon(z) if epsilon is None else float(epsilon)
    gam = default_gamma(xn) if gamma is None else float(gamma)
    if eps < 0 or gam <= 0:
        raise ValueError("epsilon must be >= 0 and gamma > 0")

    if np.ptp(z) == 0:
        return SvrModel(np.zeros((0, d)), np.zeros(0), float(z[0]), gam, C, eps, lo, scale,
                        constant=True, support_index=np.zeros(0, dtype=int))

    rows = _KernelRows(xn, gam)
    y = np.concatenate([np.ones(l), -np.ones(l)])
    p = np.concatenate([eps - z, eps + z])
    a = np.zeros(2 * l)
    grad = p.copy()
    history = []

    def qrow(t):
        k = rows(t % l)
        return y[t] * np.concatenate([k, -k])

    it = 0
    while it < max_iter:
        up = ((y > 0) & (a < C)) | ((y < 0) & (a > 0))
        low = ((y > 0) & (a > 0)) | ((y < 0) & (a < C))
        score = -y * grad
        su = np.where(up, score, -np.inf)
        sl = np.where(low, score, np.inf)
        i = int(np.argmax(su))
        j = int(np.argmin(sl))
        if su[i] - sl[j] < tol:
            break
        it += 1
        qi, qj = qrow(i), qrow(j)
        ai, aj = a[i], a[j]
        if y[i] != y[j]:
            quad = max(qi[i] + qj[j] + 2 * qi[j], 1e-12)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = max(qi[i] + qj[j] - 2 * qi[j], 1e-12)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0
                a[j] = total
        grad += qi * (a[i] - ai) + qj * (a[j] - aj)
        if debug:
            history.append(float(0.5 * a @ (grad + p)))

    bias = -_rho(a, y, grad, C)
    coef = a[:l] - a[l:]
    sv = np.abs(coef) > 0
    return SvrModel(xn[sv].copy(), coef[sv].copy(), bias, gam, C, eps, lo, scale,
                    n_iter=it, objective_history=history, support_index=np.flatnonzero(sv))


def _rho(a, y, grad, C):
    yg = y * grad
    free = (a > 0) & (a < C)
    if free.any():
        return float(yg[free].mean())
    at_ub = a >= C
    at_lb = a <= 0
    ub_set = (at_ub & (y < 0)) | (at_lb & (y > 0))
    lb_set = (at_ub & (y > 0)) | (at_lb & (y < 0))
    ub = yg[ub_set].min() if ub_set.any() else np.inf
    lb = yg[lb_set].max() if lb_set.any() else -np.inf
    return float((ub + lb) / 2)


def predict(model: SvrModel, features):
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if len(model.dual_coeffs) == 0:
        out = np.full(len(x), model.bias)
    else:
        out = _rbf(model.normalise(x), model.support_vectors, model.gamma) @ model.dual_coeffs + model.bias
    return float(out[0]) if single else out


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.ravel(values))


def save_model(model: SvrModel, path) -> None:
    """Write the versioned text model; the last line is a SHA-256 of the rest."""
    lines = [
        f"{MODEL_HEADER} v{MODEL_VERSION}",
        f"dim {model.dim}",
        f"n_sv {len(model.dual_coeffs)}",
        f"C {model.C:.17g}",
        f"epsilon {model.epsilon:.17g}",
        f"gamma {model.gamma:.17g}",
        f"bias {model.bias:.17g}",
        f"constant {int(model.constant)}",
        f"norm_min {_fmt(model.norm_min)}",
        f"norm_scale {_fmt(model.norm_scale)}",
    ]
    lines += [f"sv {c:.17g} {_fmt(v)}" for c, v in zip(model.dual_coeffs, model.support_vectors)]
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    Path(path).write_text(body + f"sha256 {digest}\n")


def load_model(path) -> SvrModel:
    text = Path(path).read_text()
    magic, _, version = text.partition("\n")[0].partition(" v")
    if magic != MODEL_HEADER:
        raise ModelFormatError(f"{path}: not an SVR model file")
    if version != str(MODEL_VERSION):
        raise VersionError(f"{path}: model version {version!r}, expected {MODEL_VERSION}")
    head, sep, tail = text.rstrip("\n").rpartition("\n")
    if not sep or not tail.startswith("sha256 "):
        raise ChecksumError(f"{path}: checksum line missing (truncated file?)")
    body = head + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != tail.split()[1]:
        raise ChecksumError(f"{path}: checksum mismatch")
    lines = body.splitlines()
    kv, svs = {}, []
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        if key == "sv":
            svs.append([float(v) for v in rest.split()])
        else:
            kv[key] = rest
    try:
        dim = int(kv["dim"])
        sv = np.array(svs).reshape(-1, dim + 1)
        if len(sv) != int(kv["n_sv"]):
            raise ModelFormatError(f"{path}: support-vector count mismatch")
        return SvrModel(
            support_vectors=sv[:, 1:], dual_coeffs=sv[:, 0], bias=float(kv["bias"]),
            gamma=float(kv["gamma"]), C=float(kv["C"]), epsilon=float(kv["epsilon"]),
            norm_min=np.array([float(v) for v in kv["norm_min"].split()]),
            norm_scale=np.array([float(v) for v in kv["norm_scale"].split()]),
            constant=bool(int(kv["constant"])))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None


def grid_search(data: TrainingSet, Cs=(10.0, 100.0, 1000.0), gammas=None,
                val_fraction: float = 0.2, groups=None, seed: int = 0, **train_kw):
    """Pick (C, gamma) by validation RMSE on a held-out fold.

    ``groups`` keeps rows of one group (e.g. one video) on the same side.
    ``gammas`` defaults to the data-driven gamma times {0.1, 1, 10}.
    """
    rng = np.random.default_rng(seed)
    n = len(data.labels)
    keys = np.asarray(groups) if groups is not None else np.arange(n)
    uniq = np.unique(keys)
    n_val = max(1, int(round(val_fraction * len(uniq))))
    val_keys = set(rng.permutation(uniq)[:n_val].tolist())
    val = np.array([k in val_keys for k in keys])
    tr = TrainingSet(data.features[~val], data.labels[~val])
    if gammas is None:
        lo, scale = _minmax(tr.features)
        g0 = default_gamma((tr.features - lo) * scale)
        gammas = (0.1 * g0, g0, 10 * g0)
    best = None
    for c in Cs:
        for g in gammas:
            m = train(tr, C=c, gamma=g, **train_kw)
            err = math.sqrt(float(np.mean((predict(m, data.features[val]) - data.labels[val]) ** 2)))
            if best is None or err < best[0]:
                best = (err, c, g)
    return best[1], best[2]
