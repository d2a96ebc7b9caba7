import numpy as np
import pytest

from vquemodes.media_io import (
    MANIFEST_HEADER, ManifestError, VideoManifestEntry, frame_bytes, load_manifest,
    read_frame_pair, write_manifest, write_yuv420,
)


def _video(tmp_path, name, frames, chroma=128):
    path = tmp_path / name
    write_yuv420(path, frames, chroma)
    return path


def _entry(tmp_path, n=10, w=64, h=64, dmos=30.0, **kw):
    frames = [np.full((h, w), k, np.uint8) for k in range(n)]
    left = _video(tmp_path, "a_L.yuv", frames)
    right = _video(tmp_path, "a_R.yuv", [255 - f for f in frames])
    return VideoManifestEntry("a", left, right, w, h, 25.0, n, dmos, "scene=x;left=none", **kw)


def test_manifest_round_trip(tmp_path):
    e = _entry(tmp_path)
    write_manifest(tmp_path / "m.txt", [e])
    text = (tmp_path / "m.txt").read_text()
    assert text.startswith(MANIFEST_HEADER + "\n")
    assert "a_L.yuv\t" in text  # stored relative to the manifest
    (got,) = load_manifest(tmp_path / "m.txt")
    assert got == e
    assert got.content_group == "x"


def test_missing_dmos_and_frame_limit(tmp_path):
    e = _entry(tmp_path, dmos=None, frame_limit=4)
    write_manifest(tmp_path / "m.txt", [e])
    (got,) = load_manifest(tmp_path / "m.txt")
    assert got.dmos is None and got.usable_frames == 4
    with pytest.raises(IndexError):
        read_frame_pair(got, 4)


def test_odd_width_rejected(tmp_path):
    with pytest.raises(ManifestError, match="dimensions must be even"):
        VideoManifestEntry("b", tmp_path / "x", tmp_path / "y", 65, 64, 25.0, 10)
    (tmp_path / "m.txt").write_text(
        MANIFEST_HEADER + "\nb\tx.yuv\ty.yuv\t65\t64\t25\t10\t-\t\n")
    with pytest.raises(ManifestError, match="m.txt:2.*dimensions must be even"):
        load_manifest(tmp_path / "m.txt", check_files=False)


def test_truncated_file_is_size_mismatch(tmp_path):
    e = _entry(tmp_path, n=10)
    data = e.left_path.read_bytes()
    e.left_path.write_bytes(data[: 9 * frame_bytes(64, 64) + 5])
    write_manifest(tmp_path / "m.txt", [e])
    with pytest.raises(ManifestError, match="need"):
        load_manifest(tmp_path / "m.txt")


@pytest.mark.parametrize("line, msg", [
    ("a\tx\ty\t64\t64\t25\t10", "expected 9 or 10"),
    ("a\tx\ty\tsixty\t64\t25\t10\t-\t", "width"),
    ("a\tx\ty\t64\t64\t25\t10\tnan\t", "finite"),
])
def test_parse_errors_carry_context(tmp_path, line, msg):
    (tmp_path / "m.txt").write_text(MANIFEST_HEADER + "\n" + line + "\n")
    with pytest.raises(ManifestError, match=msg):
        load_manifest(tmp_path / "m.txt", check_files=False)


def test_bad_header_and_duplicates(tmp_path):
    (tmp_path / "m.txt").write_text("manifest v2\n")
    with pytest.raises(ManifestError, match="header"):
        load_manifest(tmp_path / "m.txt")
    row = "a\tx\ty\t64\t64\t25\t10\t-\t"
    (tmp_path / "m.txt").write_text(f"{MANIFEST_HEADER}\n{row}\n{row}\n")
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(tmp_path / "m.txt", check_files=False)


def test_missing_video_file(tmp_path):
    (tmp_path / "m.txt").write_text(MANIFEST_HEADER + "\na\tx.yuv\ty.yuv\t64\t64\t25\t10\t-\t\n")
    with pytest.raises(ManifestError, match="missing left"):
        load_manifest(tmp_path / "m.txt")


def test_luma_of_frame_k_is_k(tmp_path):
    e = _entry(tmp_path)
    for k in range(10):
        pair = read_frame_pair(e, k)
        assert pair.index == k
        assert pair.left.dtype == np.uint8 and pair.left.shape == (64, 64)
        assert np.all(pair.left == k) and np.all(pair.right == 255 - k)
    with pytest.raises(IndexError):
        read_frame_pair(e, 10)
    with pytest.raises(IndexError):
        read_frame_pair(e, -1)


def test_written_bytes_read_back_exactly(tmp_path, rng):
    frames = [rng.integers(0, 256, (32, 48), dtype=np.uint8) for _ in range(5)]
    p = _video(tmp_path, "r.yuv", frames)
    assert p.stat().st_size == 5 * frame_bytes(48, 32)
    e = VideoManifestEntry("r", p, p, 48, 32, 30.0, 5)
    for k in (3, 0, 4, 1, 2):  # random order == sequential order
        assert np.array_equal(read_frame_pair(e, k).left, frames[k])


def test_chroma_never_leaks_into_luma(tmp_path, rng):
    frames = [rng.integers(0, 256, (16, 16), dtype=np.uint8) for _ in range(3)]
    chroma = [(rng.integers(0, 256, (8, 8), dtype=np.uint8),) * 2 for _ in range(3)]
    a = _video(tmp_path, "a.yuv", frames, 128)
    b = _video(tmp_path, "b.yuv", frames, chroma)
    ea = VideoManifestEntry("a", a, a, 16, 16, 25.0, 3)
    eb = VideoManifestEntry("b", b, b, 16, 16, 25.0, 3)
    for k in range(3):
        assert np.array_equal(read_frame_pair(ea, k).left, read_frame_pair(eb, k).left)


def test_ten_bit_rejected():
    with pytest.raises(ValueError, match="8-bit"):
        frame_bytes(64, 64, bit_depth=10)
