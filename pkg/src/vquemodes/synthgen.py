"""Synthetic stereo sequences with known motion and disparity.

The left view is a periodic band-limited noise texture translated by a
constant ``(dx, dy)`` per frame (wrap-around). The right view is the left
view rolled horizontally by ``disparity`` so that a left block at column
``x`` is found in the right view at ``x + disparity``. Distortions are
applied after the geometry, per view.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .media_io import VideoManifestEntry, write_manifest, write_yuv420

__all__ = [
    "Distortion",
    "SynthSceneSpec",
    "GroundTruth",
    "render_texture",
    "render_views",
    "apply_distortion",
    "generate",
    "read_ground_truth",
    "load_scene_specs",
    "generate_corpus",
]

DISTORTION_KINDS = ("none", "gaussian_blur", "blockiness", "additive_noise")


@dataclass(frozen=True)
class Distortion:
    kind: str = "none"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in DISTORTION_KINDS:
            raise ValueError(f"unknown distortion {self.kind!r}")
        if self.strength < 0:
            raise ValueError("distortion strength must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "Distortion":
        """``none`` or ``kind(strength)``, e.g. ``gaussian_blur(2)``."""
        text = text.strip()
        if text in ("", "none"):
            return cls()
        name, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"cannot parse distortion {text!r}")
        return cls(name.strip(), float(rest[:-1]))

    def __str__(self):
        return "none" if self.kind == "none" else f"{self.kind}({self.strength:g})"


@dataclass(frozen=True)
class SynthSceneSpec:
    width: int = 128
    height: int = 128
    frame_count: int = 4
    texture_seed: int = 0
    global_motion: tuple[int, int] = (0, 0)
    global_disparity: int = 0
    distortion: Distortion = field(default_factory=Distortion)
    left_distortion: Distortion | None = None
    right_distortion: Distortion | None = None
    name: str = "synth"
    dmos: float | None = None
    scene: str | None = None
    motion_range: int = 7
    disparity_range: int = 16
    texture_smoothness: float = 1.5

    def validate(self) -> None:
        if self.width % 2 or self.height % 2 or self.width < 16 or self.height < 16:
            raise ValueError("width and height must be even and >= 16")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        dx, dy = self.global_motion
        if abs(dx) > self.motion_range or abs(dy) > self.motion_range:
            raise ValueError(f"|motion| exceeds search range {self.motion_range}")
        if abs(self.global_disparity) > self.disparity_range:
            raise ValueError(f"|disparity| exceeds search range {self.disparity_range}")
        if self.texture_smoothness <= 0:
            raise ValueError("texture_smoothness must be positive")

    def view_distortion(self, view: str) -> Distortion:
        override = self.left_distortion if view == "left" else self.right_distortion
        return self.distortion if override is None else override


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame true motion (from frame t-1 to t) and disparity."""

    dx: np.ndarray
    dy: np.ndarray
    disparity: np.ndarray

    def write(self, path) -> None:
        lines = [f"{t} {int(a)} {int(b)} {int(d)}"
                 for t, (a, b, d) in enumerate(zip(self.dx, self.dy, self.disparity))]
        Path(path).write_text("\n".join(lines) + "\n")


def read_ground_truth(path) -> GroundTruth:
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if rows.shape[1] != 4 or not np.array_equal(rows[:, 0], np.arange(len(rows))):
        raise ValueError(f"{path}: malformed ground-truth sidecar")
    return GroundTruth(dx=rows[:, 1], dy=rows[:, 2], disparity=rows[:, 3])


def render_texture(height: int, width: int, seed: int, smoothness: float = 1.5) -> np.ndarray:
    """Periodic smoothed noise quantised to uint8 (mean 128, std about 40)."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((height, width))
    fy = sfft.fftfreq(height)[:, None]
    fx = sfft.fftfreq(width)[None, :]
    # Gaussian low-pass plus a 1/f tail keeps some fine structure for SSIM windows
    r = np.hypot(fx, fy)
    gain = np.exp(-2 * (np.pi * smoothness * r) ** 2) + 0.15 / (1 + 40 * r)
    gain[0, 0] = 0.0
    tex = np.real(sfft.ifft2(sfft.fft2(noise) * gain))
    std = tex.std()
    if std == 0:
        raise ValueError("texture has zero variance")
    tex = 128 + 40 * tex / std
    return np.clip(np.rint(tex), 0, 255).astype(np.uint8)


def _blockiness(img: np.ndarray, strength: float) -> np.ndarray:
    if strength == 0:
        return img
    h, w = img.shape
    h8, w8 = h - h % 8, w - w % 8
    out = img.copy()
    tiles = img[:h8, :w8].reshape(h8 // 8, 8, w8 // 8, 8).transpose(0, 2, 1, 3)
    coef = sfft.dctn(tiles, axes=(2, 3), norm="ortho")
    u = np.arange(8)
    step = strength * (1.0 + u[:, None] + u[None, :])
    coef = np.round(coef / step) * step
    rec = sfft.idctn(coef, axes=(2, 3), norm="ortho")
    out[:h8, :w8] = rec.transpose(0, 2, 1, 3).reshape(h8, w8)
    return out


def apply_distortion(frame: np.ndarray, d: Distortion, rng_seed=None) -> np.ndarray:
    """Distort a uint8 plane; noise draws come from ``rng_seed``."""
    if d.kind == "none" or d.strength == 0:
        return frame
    img = frame.astype(np.float64)
    if d.kind == "gaussian_blur":
        img = ndimage.gaussian_filter(img, d.strength, mode="wrap")
    elif d.kind == "additive_noise":
        img = img + np.random.default_rng(rng_seed).normal(0.0, d.strength, img.shape)
    elif d.kind == "blockiness":
        img = _blockiness(img, d.strength)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_views(spec: SynthSceneSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Render (left frames, right frames) as uint8 luma planes."""
    spec.validate()
    base = render_texture(spec.height, spec.width, spec.texture_seed, spec.texture_smoothness)
    dx, dy = spec.global_motion
    lefts, rights = [], []
    for t in range(spec.frame_count):
        clean_left = np.roll(base, (t * dy, t * dx), axis=(0, 1))
        clean_right = np.roll(clean_left, spec.global_disparity, axis=1)
        lefts.append(apply_distortion(clean_left, spec.view_distortion("left"),
                                      [spec.texture_seed, t, 0]))
        rights.append(apply_distortion(clean_right, spec.view_distortion("right"),
                                       [spec.texture_seed, t, 1]))
    return lefts, rights


def generate(spec: SynthSceneSpec, out_dir) -> tuple[VideoManifestEntry, GroundTruth]:
    """Render ``spec`` into ``out_dir`` (left/right .yuv, .gt sidecar, .manifest)."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lefts, rights = render_views(spec)
    left_path = out_dir / f"{spec.name}_L.yuv"
    right_path = out_dir / f"{spec.name}_R.yuv"
    write_yuv420(left_path, lefts)
    write_yuv420(right_path, rights)

    n = spec.frame_count
    gt = GroundTruth(dx=np.full(n, spec.global_motion[0]), dy=np.full(n, spec.global_motion[1]),
                     disparity=np.full(n, spec.global_disparity))
    gt.write(out_dir / f"{spec.name}.gt")

    tag = [f"left={spec.view_distortion('left')}", f"right={spec.view_distortion('right')}"]
    if spec.scene:
        tag.insert(0, f"scene={spec.scene}")
    entry = VideoManifestEntry(
        id=spec.name, left_path=left_path.resolve(), right_path=right_path.resolve(),
        width=spec.width, height=spec.height, fps=25.0, frame_count=n, dmos=spec.dmos,
        distortion_tag=";".join(tag))
    write_manifest(out_dir / f"{spec.name}.manifest", [entry])
    return entry, gt


def load_scene_specs(path) -> list[SynthSceneSpec]:
    """Parse an INI-style scene file: one ``[name]`` section per scene.

    Keys: width, height, frame_count, texture_seed, motion (``dx,dy``),
    disparity, distortion, left_distortion, right_distortion, dmos, scene,
    motion_range, disparity_range. A ``[DEFAULT]`` section supplies shared
    values.
    """
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    specs = []
    for name in cp.sections():
        s = cp[name]
        motion = tuple(int(v) for v in s.get("motion", "0,0").split(","))
        if len(motion) != 2:
            raise ValueError(f"[{name}] motion must be 'dx,dy'")
        opt = lambda key: Distortion.parse(s[key]) if key in s else None  # noqa: E731
        specs.append(SynthSceneSpec(
            width=s.getint("width", 128), height=s.getint("height", 128),
            frame_count=s.getint("frame_count", 4), texture_seed=s.getint("texture_seed", 0),
            global_motion=motion, global_disparity=s.getint("disparity", 0),
            distortion=Distortion.parse(s.get("distortion", "none")),
            left_distortion=opt("left_distortion"), right_distortion=opt("right_distortion"),
            name=name, dmos=s.getfloat("dmos") if "dmos" in s else None,
            scene=s.get("scene"), motion_range=s.getint("motion_range", 7),
            disparity_range=s.getint("disparity_range", 16)))
    return specs


def generate_corpus(specs, out_dir, manifest_name: str = "manifest.txt") -> Path:
    """Generate every spec and write one combined manifest; returns its path."""
    out_dir = Path(out_dir)
    entries = [generate(spec, out_dir)[0] for spec in specs]
    manifest = out_dir / manifest_name
    write_manifest(manifest, entries)
    return manifest


def with_distortion(spec: SynthSceneSpec, d: Distortion, **changes) -> SynthSceneSpec:
    return replace(spec, distortion=d, **changes)
