"""Raw YUV420P stereo video access and the dataset manifest.

Manifest layout (UTF-8, tab separated)::

    vquemodes-manifest v1
    id  left_path  right_path  width  height  fps  frame_count  dmos  distortion_tag  [frame_limit]

``dmos`` is ``-`` when the video is unlabelled. The optional tenth column
caps how many frames are used (``-`` or absent means all). Relative paths
are resolved against the manifest's directory.

Raw files are headerless planar YUV420P, 8 bits per sample, so one frame
occupies ``width * height * 3 // 2`` bytes and the luma plane is the first
``width * height`` bytes of it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MANIFEST_HEADER = "vquemodes-manifest v1"

__all__ = [
    "ManifestError",
    "VideoManifestEntry",
    "StereoFramePair",
    "frame_bytes",
    "load_manifest",
    "write_manifest",
    "read_luma",
    "read_frame_pair",
    "write_yuv420",
]


class ManifestError(ValueError):
    """Malformed or inconsistent manifest."""


def frame_bytes(width: int, height: int, bit_depth: int = 8) -> int:
    if bit_depth != 8:
        raise ValueError(f"only 8-bit YUV420P is supported, got {bit_depth}-bit")
    return width * height * 3 // 2


@dataclass(frozen=True)
class VideoManifestEntry:
    id: str
    left_path: Path
    right_path: Path
    width: int
    height: int
    fps: float
    frame_count: int
    dmos: float | None = None
    distortion_tag: str = ""
    frame_limit: int | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ManifestError(f"{self.id}: dimensions must be positive")
        if self.width % 2 or self.height % 2:
            raise ManifestError(
                f"{self.id}: dimensions must be even, got {self.width}x{self.height}")
        if self.frame_count < 1:
            raise ManifestError(f"{self.id}: frame_count must be >= 1")
        if self.dmos is not None and not math.isfinite(self.dmos):
            raise ManifestError(f"{self.id}: dmos must be finite")
        if self.frame_limit is not None and self.frame_limit < 1:
            raise ManifestError(f"{self.id}: frame_limit must be >= 1")

    @property
    def frame_size(self) -> int:
        return frame_bytes(self.width, self.height)

    @property
    def usable_frames(self) -> int:
        if self.frame_limit is None:
            return self.frame_count
        return min(self.frame_count, self.frame_limit)

    @property
    def content_group(self) -> str:
        """Source-scene key: the ``scene=`` token of the tag, else the id."""
        for token in self.distortion_tag.replace(",", ";").split(";"):
            key, _, value = token.strip().partition("=")
            if key == "scene" and value:
                return value
        return self.id

    def check_files(self) -> None:
        need = self.frame_count * self.frame_size
        for view, path in (("left", self.left_path), ("right", self.right_path)):
            if not path.is_file():
                raise ManifestError(f"{self.id}: missing {view} video file {path}")
            size = path.stat().st_size
            if size < need:
                raise ManifestError(
                    f"{self.id}: {view} file holds {size} bytes, "
                    f"{self.frame_count} frames of {self.width}x{self.height} need {need}")


@dataclass(frozen=True)
class StereoFramePair:
    index: int
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise ValueError("left and right planes differ in shape")

    @property
    def height(self) -> int:
        return self.left.shape[0]

    @property
    def width(self) -> int:
        return self.left.shape[1]


def _parse_int(value: str, field: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ManifestError(f"{where}: field '{field}' is not an integer: {value!r}") from None


def _parse_float(value: str, field: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ManifestError(f"{where}: field '{field}' is not a number: {value!r}") from None


def load_manifest(path, check_files: bool = True) -> list[VideoManifestEntry]:
    path = Path(path)
    base = path.parent
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise ManifestError(f"{path}:1: expected header '{MANIFEST_HEADER}'")
    entries = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        where = f"{path}:{lineno}"
        fields = line.rstrip("\n").split("\t")
        if len(fields) not in (9, 10):
            raise ManifestError(f"{where}: expected 9 or 10 tab-separated fields, got {len(fields)}")
        vid, left, right = fields[0], fields[1], fields[2]
        if not vid:
            raise ManifestError(f"{where}: empty id")
        if vid in seen:
            raise ManifestError(f"{where}: duplicate id {vid!r}")
        seen.add(vid)
        width = _parse_int(fields[3], "width", where)
        height = _parse_int(fields[4], "height", where)
        fps = _parse_float(fields[5], "fps", where)
        frame_count = _parse_int(fields[6], "frame_count", where)
        dmos = None if fields[7] == "-" else _parse_float(fields[7], "dmos", where)
        limit = None
        if len(fields) == 10 and fields[9] not in ("", "-"):
            limit = _parse_int(fields[9], "frame_limit", where)
        try:
            entry = VideoManifestEntry(
                id=vid,
                left_path=(base / left).resolve(),
                right_path=(base / right).resolve(),
                width=width, height=height, fps=fps, frame_count=frame_count,
                dmos=dmos, distortion_tag=fields[8], frame_limit=limit)
            if check_files:
                entry.check_files()
        except ManifestError as exc:
            raise ManifestError(f"{where}: {exc}") from None
        entries.append(entry)
    return entries


def _fmt_path(p: Path, base: Path) -> str:
    try:
        return os.path.relpath(p, base)
    except ValueError:
        return str(p)


def write_manifest(path, entries: Iterable[VideoManifestEntry]) -> None:
    path = Path(path)
    base = path.parent.resolve()
    rows = [MANIFEST_HEADER]
    for e in entries:
        dmos = "-" if e.dmos is None else repr(float(e.dmos))
        fields = [e.id, _fmt_path(Path(e.left_path).resolve(), base),
                  _fmt_path(Path(e.right_path).resolve(), base),
                  str(e.width), str(e.height), repr(float(e.fps)), str(e.frame_count),
                  dmos, e.distortion_tag]
        if e.frame_limit is not None:
            fields.append(str(e.frame_limit))
        rows.append("\t".join(fields))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_luma(path, width: int, height: int, index: int) -> np.ndarray:
    """Luma plane of frame ``index``, addressed by offset (no reader state)."""
    n = width * height
    offset = index * frame_bytes(width, height)
    with open(path, "rb") as fh:
        fh.seek(offset)
        buf = fh.read(n)
    if len(buf) != n:
        raise OSError(f"{path}: short read at frame {index}")
    return np.frombuffer(buf, dtype=np.uint8).reshape(height, width).copy()


def read_frame_pair(entry: VideoManifestEntry, index: int) -> StereoFramePair:
    if not 0 <= index < entry.usable_frames:
        raise IndexError(f"{entry.id}: frame {index} out of range [0, {entry.usable_frames})")
    left = read_luma(entry.left_path, entry.width, entry.height, index)
    right = read_luma(entry.right_path, entry.width, entry.height, index)
    return StereoFramePair(index=index, left=left, right=right)


def write_yuv420(path, luma_frames: Sequence[np.ndarray], chroma: int | Sequence = 128) -> None:
    """Write luma planes as YUV420P; ``chroma`` is a fill value or per-frame (u, v) planes."""
    with open(path, "wb") as fh:
        for k, y in enumerate(luma_frames):
            y = np.asarray(y)
            if y.dtype != np.uint8:
                raise ValueError("luma frames must be uint8")
            h, w = y.shape
            if h % 2 or w % 2:
                raise ValueError("dimensions must be even")
            fh.write(np.ascontiguousarray(y).tobytes())
            if isinstance(chroma, (int, np.integer)):
                fh.write(bytes([int(chroma)]) * (2 * (h // 2) * (w // 2)))
            else:
                u, v = chroma[k]
                fh.write(np.asarray(u, dtype=np.uint8).tobytes())
                fh.write(np.asarray(v, dtype=np.uint8).tobytes())
