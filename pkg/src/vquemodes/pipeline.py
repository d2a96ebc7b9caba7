"""End-to-end quality model: frame features, SVR training, trials.

Per frame ``i`` of a video (``i`` in ``[0, frames - 2]``):

1. three-step motion search from left frame ``i`` to ``i + 1`` gives the
   block motion magnitude map;
2. SSIM block matching of left/right frame ``i`` gives the block
   disparity map;
3. both block-grid maps go through the steerable pyramid and a BGGD is fitted
   to each of the 18 co-located subband pairs;
4. the spatial score is the mean of the left and right NIQE-style scores
   (or externally supplied scores).

The 37-vector ``[alpha_1..18, beta_1..18, S]`` is one SVR training row,
labelled with its video's DMOS. Video scores are plain means of frame
predictions.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bggd, disparity, metrics, motion, pyramid, spatial, svr
from .media_io import VideoManifestEntry, read_frame_pair

__all__ = [
    "PipelineConfig", "load_config", "ExtractionError", "FrameFeatureVector", "VideoFeatures",
    "FeatureCache", "SpatialProvider", "extract_frame", "extract_features", "extract_corpus",
    "write_cache", "read_cache", "build_training_set", "leakage_count", "train_quality_model",
    "predict_frames", "predict_video_quality", "TrialResult", "TrialReport", "split_videos",
    "run_trials", "format_report",
]

CACHE_HEADER = "# vquemodes-features v1"
N_SUBBANDS = len(pyramid.SUBBAND_KEYS)
FEATURE_DIM = 2 * N_SUBBANDS + 1


class ExtractionError(RuntimeError):
    """A module failure during extraction, tagged with the video and frame."""

    def __init__(self, video_id, frame_index, cause):
        super().__init__(f"{video_id} frame {frame_index}: {type(cause).__name__}: {cause}")
        self.video_id = video_id
        self.frame_index = frame_index


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable settings, loadable from a ``key = value`` text file.

    ``svr_epsilon``/``svr_gamma`` of ``None`` (``auto`` in the file) select
    the data-driven defaults.
    """

    motion_range: int = 7
    disparity_range: int = 32
    pyramid_scales: int = 3
    pyramid_orientations: int = 6
    spatial_provider: str = "niqe"  # or "external"
    pristine_model: str | None = None
    external_scores: str | None = None
    patch_size: int = spatial.DEFAULT_PATCH
    svr_C: float = svr.DEFAULT_C
    svr_epsilon: float | None = None
    svr_gamma: float | None = None
    svr_tol: float = 1e-3
    grid_search: bool = False
    trials: int = 1000
    seed: int = 0
    test_fraction: float = 0.2
    group_by_content: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.pyramid_scales != pyramid.N_SCALES or self.pyramid_orientations != pyramid.N_ORIENTATIONS:
            raise ValueError("pyramid settings are fixed at 3 scales x 6 orientations")
        if self.spatial_provider not in ("niqe", "external"):
            raise ValueError(f"unknown spatial provider {self.spatial_provider!r}")
        if self.motion_range < 1 or self.disparity_range < 0:
            raise ValueError("search ranges must be positive")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.trials < 1 or self.workers < 1:
            raise ValueError("trials and workers must be >= 1")


def _coerce(name, text, kind):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"config {name}: expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if text.lower() in ("auto", "none", ""):
        return None
    return kind(text)


_FIELD_TYPES = {
    "motion_range": int, "disparity_range": int, "pyramid_scales": int,
    "pyramid_orientations": int, "spatial_provider": str, "pristine_model": str,
    "external_scores": str, "patch_size": int, "svr_C": float, "svr_epsilon": float,
    "svr_gamma": float, "svr_tol": float, "grid_search": bool, "trials": int, "seed": int,
    "test_fraction": float, "group_by_content": bool, "workers": int,
}


def load_config(path=None, **overrides) -> PipelineConfig:
    """Read a config file of ``key = value`` lines (``#`` starts a comment).

    Relative paths inside the file resolve against its directory. Keyword
    overrides that are not ``None`` win over the file.
    """
    values = {}
    if path is not None:
        base = Path(path).parent
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
            try:
                v = _coerce(key, val, _FIELD_TYPES[key])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if key in ("pristine_model", "external_scores") and v is not None:
                v = str((base / v).resolve()) if not Path(v).is_absolute() else v
            values[key] = v
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


# ----------------------------------------------------------------- features

@dataclass(frozen=True)
class FrameFeatureVector:
    video_id: str
    frame_index: int
    alphas: np.ndarray
    betas: np.ndarray
    spatial: float
    chis: np.ndarray
    degenerate: np.ndarray  # bool per subband

    @property
    def bggd(self) -> np.ndarray:
        return np.concatenate([self.alphas, self.betas])

    @property
    def consolidated(self) -> np.ndarray:
        return np.concatenate([self.alphas, self.betas, [self.spatial]])


class SpatialProvider:
    """Left/right spatial scores for a frame, built-in or external."""

    def __init__(self, config: PipelineConfig, pristine=None, external=None):
        self.kind = config.spatial_provider
        self.pristine = pristine
        self.external = external
        if self.kind == "niqe" and self.pristine is None:
            if config.pristine_model is None:
                raise ValueError("spatial provider 'niqe' needs a pristine model")
            self.pristine = spatial.PristineModel.load(config.pristine_model)
        if self.kind == "external" and self.external is None:
            if config.external_scores is None:
                raise ValueError("spatial provider 'external' needs a score file")
            self.external = spatial.load_external_scores(config.external_scores)

    def __call__(self, video_id, index, left, right) -> float:
        if self.kind == "external":
            try:
                l, r = self.external[(video_id, index)]
            except KeyError:
                raise spatial.ExternalScoreError(
                    f"no external score for {video_id} frame {index}") from None
        else:
            l = spatial.niqe_score(left, self.pristine)
            r = spatial.niqe_score(right, self.pristine)
        return spatial.combine(l, r)


def frame_features(video_id, index, left, right, next_left, config: PipelineConfig,
                   provider: SpatialProvider) -> FrameFeatureVector:
    """Features of one frame from its stereo pair and the next left frame."""
    mfield = motion.three_step_search(left, next_left, config.motion_range)
    dfield = disparity.estimate_disparity(left, right, config.disparity_range)
    mpyr = pyramid.decompose(mfield.magnitudes)
    dpyr = pyramid.decompose(dfield.disparities)
    feats = bggd.extract_bggd_features(mpyr, dpyr)
    s = provider(video_id, index, left, right)
    return FrameFeatureVector(video_id, index, feats.alphas, feats.betas, float(s),
                              feats.chis, feats.degenerate)


def extract_frame(entry: VideoManifestEntry, index: int, config: PipelineConfig,
                  provider: SpatialProvider) -> FrameFeatureVector:
    try:
        pair = read_frame_pair(entry, index)
        nxt = read_frame_pair(entry, index + 1)
        return frame_features(entry.id, index, pair.left, pair.right, nxt.left, config, provider)
    except ExtractionError:
        raise
    except Exception as exc:
        raise ExtractionError(entry.id, index, exc) from exc


def _frame_indices(entry: VideoManifestEntry) -> range:
    n = entry.usable_frames
    if n < 2:
        raise ValueError(f"{entry.id}: need at least 2 frames, got {n}")
    return range(n - 1)


def extract_features(entry: VideoManifestEntry, config: PipelineConfig,
                     provider: SpatialProvider | None = None) -> list[FrameFeatureVector]:
    provider = provider or SpatialProvider(config)
    return [extract_frame(entry, i, config, provider) for i in _frame_indices(entry)]


_WORKER: dict = {}


def _worker_init(config, provider):
    _WORKER["config"] = config
    _WORKER["provider"] = provider


def _worker_task(task):
    entry, index = task
    return extract_frame(entry, index, _WORKER["config"], _WORKER["provider"])


@dataclass
class VideoFeatures:
    video_id: str
    dmos: float | None
    group: str
    frames: list = field(default_factory=list)


@dataclass
class FeatureCache:
    videos: dict  # video_id -> VideoFeatures, in manifest order

    def labelled_ids(self) -> list:
        return [v for v, rec in self.videos.items() if rec.dmos is not None]

    def __getitem__(self, video_id) -> VideoFeatures:
        try:
            return self.videos[video_id]
        except KeyError:
            raise KeyError(f"video {video_id!r} not in feature cache") from None


def extract_corpus(entries, config: PipelineConfig, provider: SpatialProvider | None = None,
                   workers: int | None = None) -> FeatureCache:
    """Extract every frame of every video, optionally across processes.

    Frames are independent, so the result does not depend on ``workers``.
    """
    entries = list(entries)
    provider = provider or SpatialProvider(config)
    tasks = [(e, i) for e in entries for i in _frame_indices(e)]
    workers = config.workers if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(config, provider)) as pool:
            results = list(pool.map(_worker_task, tasks, chunksize=1))
    else:
        results = [extract_frame(e, i, config, provider) for e, i in tasks]
    cache = FeatureCache({e.id: VideoFeatures(e.id, e.dmos, e.content_group) for e in entries})
    for fv in results:
        cache.videos[fv.video_id].frames.append(fv)
    return cache


# -------------------------------------------------------------- cache file

def _g9(v: float) -> str:
    return f"{v:.9g}"


def write_cache(path, cache: FeatureCache) -> None:
    """Text cache: video header lines, then one line per frame.

    Frame lines hold ``video_id frame_index alpha1..18 beta1..18 S chi1..18
    mask`` with numbers at 9 significant digits and the degeneracy mask as
    18 ``0``/``1`` characters.
    """
    out = io.StringIO()
    out.write(CACHE_HEADER + "\n")
    for rec in cache.videos.values():
        dmos = "-" if rec.dmos is None else f"{rec.dmos:.17g}"
        out.write(f"@video {rec.video_id} {dmos} {rec.group}\n")
    for rec in cache.videos.values():
        for fv in rec.frames:
            nums = list(fv.alphas) + list(fv.betas) + [fv.spatial] + list(fv.chis)
            mask = "".join("1" if d else "0" for d in fv.degenerate)
            out.write(f"{fv.video_id} {fv.frame_index} {' '.join(map(_g9, nums))} {mask}\n")
    Path(path).write_text(out.getvalue())


def read_cache(path) -> FeatureCache:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CACHE_HEADER:
        raise ValueError(f"{path}: not a feature cache ('{CACHE_HEADER}' header missing)")
    videos = {}
    k = N_SUBBANDS
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        where = f"{path}:{lineno}"
        if parts[0] == "@video":
            if len(parts) != 4:
                raise ValueError(f"{where}: malformed video line")
            dmos = None if parts[2] == "-" else float(parts[2])
            videos[parts[1]] = VideoFeatures(parts[1], dmos, parts[3])
            continue
        if len(parts) != 3 + 3 * k + 1:
            raise ValueError(f"{where}: expected {3 * k + 4} fields, got {len(parts)}")
        vid = parts[0]
        if vid not in videos:
            raise ValueError(f"{where}: frame of undeclared video {vid!r}")
        try:
            idx = int(parts[1])
            nums = np.array([float(v) for v in parts[2:-1]])
        except ValueError:
            raise ValueError(f"{where}: bad number") from None
        mask = parts[-1]
        if len(mask) != k or set(mask) - {"0", "1"}:
            raise ValueError(f"{where}: bad degeneracy mask")
        rec = videos[vid]
        if idx != len(rec.frames):
            raise ValueError(f"{where}: frame {idx} out of order for {vid}")
        rec.frames.append(FrameFeatureVector(
            vid, idx, nums[:k], nums[k:2 * k], float(nums[2 * k]), nums[2 * k + 1:],
            np.array([c == "1" for c in mask])))
    return FeatureCache(videos)


# ------------------------------------------------------------------ model

def build_training_set(cache: FeatureCache, video_ids) -> svr.TrainingSet:
    """One row per frame of each listed video, labelled with its DMOS."""
    video_ids = list(video_ids)
    if not video_ids:
        raise ValueError("empty training split")
    rows, labels, ids = [], [], []
    for vid in video_ids:
        rec = cache[vid]
        if rec.dmos is None:
            raise ValueError(f"training video {vid!r} has no dmos")
        if not rec.frames:
            raise ValueError(f"training video {vid!r} has no cached frames")
        for fv in rec.frames:
            rows.append(fv.consolidated)
            labels.append(rec.dmos)
            ids.append((vid, fv.frame_index))
    return svr.TrainingSet(np.array(rows), np.array(labels), ids)


def leakage_count(data: svr.TrainingSet, test_ids) -> int:
    """Number of training rows that come from test videos (should be 0)."""
    test = set(test_ids)
    return sum(1 for vid, _ in data.row_ids if vid in test)


def _fit(data: svr.TrainingSet, config: PipelineConfig) -> svr.SvrModel:
    C, gamma = config.svr_C, config.svr_gamma
    if config.grid_search:
        groups = [vid for vid, _ in data.row_ids]
        C, gamma = svr.grid_search(data, groups=groups, seed=config.seed,
                                   epsilon=config.svr_epsilon, tol=config.svr_tol)
    return svr.train(data, C=C, epsilon=config.svr_epsilon, gamma=gamma, tol=config.svr_tol)


def train_quality_model(cache: FeatureCache, train_ids, config: PipelineConfig) -> svr.SvrModel:
    return _fit(build_training_set(cache, train_ids), config)


def predict_frames(model: svr.SvrModel, frames) -> np.ndarray:
    if not frames:
        raise ValueError("no frames to score")
    return np.atleast_1d(svr.predict(model, np.array([fv.consolidated for fv in frames])))


def predict_video_quality(model: svr.SvrModel, frames) -> tuple[float, float]:
    """(mean, std) of the frame-level predictions."""
    p = predict_frames(model, frames)
    return float(p.mean()), float(p.std())


# ----------------------------------------------------------------- trials

@dataclass(frozen=True)
class TrialResult:
    trial_id: int
    train_ids: tuple
    test_ids: tuple
    predictions: dict  # test video id -> predicted score
    lcc: float
    srocc: float
    rmse: float
    mapping: str


@dataclass(frozen=True)
class TrialReport:
    results: list
    n_trials: int
    seed: int
    group_by_content: bool
    n_videos: int

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.results])

    def aggregate(self, name) -> tuple[float, float, float]:
        """(mean, median, std) ignoring trials where the metric is undefined."""
        v = self.column(name)
        v = v[np.isfinite(v)]
        if len(v) == 0:
            return (math.nan,) * 3
        return float(v.mean()), float(np.median(v)), float(v.std())


def split_videos(cache: FeatureCache, rng: np.random.Generator, test_fraction=0.2,
                 group_by_content=False):
    """Random video-level split; with grouping, whole scenes move together."""
    ids = cache.labelled_ids()
    units = sorted({cache[v].group for v in ids}) if group_by_content else sorted(ids)
    if len(units) < 2:
        raise ValueError("need at least 2 split units")
    n_test = min(len(units) - 1, max(1, int(round(test_fraction * len(units)))))
    test_units = set(rng.permutation(units)[:n_test].tolist())
    key = (lambda v: cache[v].group) if group_by_content else (lambda v: v)
    test = tuple(v for v in ids if key(v) in test_units)
    train = tuple(v for v in ids if key(v) not in test_units)
    return train, test


def _run_one(args):
    cache, config, trial_id, seq = args
    rng = np.random.default_rng(seq)
    train_ids, test_ids = split_videos(cache, rng, config.test_fraction, config.group_by_content)
    if set(train_ids) & set(test_ids):
        raise RuntimeError(f"trial {trial_id}: train/test overlap")
    data = build_training_set(cache, train_ids)
    if leakage_count(data, test_ids):
        raise RuntimeError(f"trial {trial_id}: test frames leaked into training rows")
    model = _fit(data, config)
    preds = {v: predict_video_quality(model, cache[v].frames)[0] for v in test_ids}
    scores = np.array([preds[v] for v in test_ids])
    dmos = np.array([cache[v].dmos for v in test_ids])
    if len(test_ids) >= 2:
        m = metrics.evaluate_scores(scores, dmos)
        lcc, srocc, err, mapping = m.lcc, m.srocc, m.rmse, m.mapping
    else:
        lcc = srocc = math.nan
        err, mapping = metrics.rmse(scores, dmos), "none"
    return TrialResult(trial_id, train_ids, test_ids, preds, lcc, srocc, err, mapping)


def _run_guarded(args):
    try:
        return _run_one(args)
    except Exception as exc:
        raise RuntimeError(f"trial {args[2]} failed: {type(exc).__name__}: {exc}") from exc


def run_trials(cache: FeatureCache, config: PipelineConfig, n_trials: int | None = None,
               seed: int | None = None) -> TrialReport:
    """Repeated random splits: train, score test videos, map, measure.

    Each trial draws its split from its own child of the master seed, so
    results do not depend on ``config.workers``.
    """
    n_trials = config.trials if n_trials is None else n_trials
    seed = config.seed if seed is None else seed
    if len(cache.labelled_ids()) < 5:
        raise ValueError(f"need at least 5 labelled videos, got {len(cache.labelled_ids())}")
    children = np.random.SeedSequence(seed).spawn(n_trials)
    jobs = [(cache, config, t, children[t]) for t in range(n_trials)]
    if config.workers > 1 and n_trials > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_guarded, jobs))
    else:
        results = [_run_guarded(j) for j in jobs]
    return TrialReport(results, n_trials, seed, config.group_by_content,
                       len(cache.labelled_ids()))


def _num(v: float) -> str:
    return "nan" if not math.isfinite(v) else f"{v:.6f}"


def format_report(report: TrialReport) -> str:
    mode = "content" if report.group_by_content else "video"
    lines = [
        "vquemodes evaluation report",
        f"split mode: {mode}-level  trials: {report.n_trials}  seed: {report.seed}  "
        f"videos: {report.n_videos}",
        "",
        f"{'metric':<8}{'mean':>12}{'median':>12}{'std':>12}",
    ]
    for name in ("lcc", "srocc", "rmse"):
        mean, med, sd = report.aggregate(name)
        lines.append(f"{name:<8}{_num(mean):>12}{_num(med):>12}{_num(sd):>12}")
    mappings = sorted({r.mapping for r in report.results})
    lines += [f"score mapping: {', '.join(mappings)}", "", "trial_id lcc srocc rmse"]
    lines += [f"{r.trial_id} {_num(r.lcc)} {_num(r.srocc)} {_num(r.rmse)}" for r in report.results]
    return "\n".join(lines) + "\n"
