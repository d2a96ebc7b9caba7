import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vquemodes import motion, synthgen as sg

B = motion.BLOCK


def _sad(prev, cur, r, c, vx, vy):
    y, x = r * B - vy, c * B - vx
    if y < 0 or x < 0 or y + B > prev.shape[0] or x + B > prev.shape[1]:
        return None
    return int(np.abs(prev[y:y + B, x:x + B].astype(int) - cur[r * B:(r + 1) * B, c * B:(c + 1) * B]).sum())


def _better(cand, best):
    # (sad, |v|^2) lexicographic; earlier candidates win exact ties
    return best is None or (cand[0], cand[1]) < (best[0], best[1])


def loop_three_step(prev, cur, rng_=7):
    rows, cols = prev.shape[0] // B, prev.shape[1] // B
    out = np.zeros((rows, cols, 2), int)
    for r in range(rows):
        for c in range(cols):
            cx = cy = 0
            step = 4 if rng_ == 7 else 1 << (rng_.bit_length() - 1)
            while step >= 1:
                best = None
                for oy in (-1, 0, 1):
                    for ox in (-1, 0, 1):
                        vx, vy = cx + ox * step, cy + oy * step
                        if max(abs(vx), abs(vy)) > rng_:
                            continue
                        s = _sad(prev, cur, r, c, vx, vy)
                        if s is not None and _better((s, vx * vx + vy * vy), best):
                            best = (s, vx * vx + vy * vy, vx, vy)
                if best is not None:
                    cx, cy = best[2], best[3]
                step //= 2
            out[r, c] = cx, cy
    return out


def _scene(seed, dx, dy, size=64):
    left, _ = sg.render_views(sg.SynthSceneSpec(width=size, height=size, frame_count=2,
                                                texture_seed=seed, global_motion=(dx, dy)))
    return left


def test_three_step_matches_scalar_oracle():
    for seed, (dx, dy) in enumerate([(3, -2), (7, 7), (-5, 1), (0, 0)]):
        prev, cur = _scene(seed, dx, dy)
        got = motion.three_step_search(prev, cur).vectors
        assert np.array_equal(got, loop_three_step(prev, cur))


def test_full_search_recovers_translation():
    for seed, (dx, dy) in enumerate([(4, 2), (-7, 6), (0, -3)]):
        prev, cur = _scene(seed, dx, dy)
        v = motion.full_search(prev, cur).vectors[1:-1, 1:-1]
        assert np.all(v == [dx, dy])


def test_zero_motion_and_identical_frames():
    f = sg.render_texture(64, 64, 1)
    for search in (motion.three_step_search, motion.full_search):
        mf = search(f, f)
        assert np.all(mf.vectors == 0) and np.all(mf.magnitudes == 0)


def test_field_geometry_and_magnitudes():
    prev, cur = _scene(2, 3, 4, size=64)
    mf = motion.three_step_search(prev[:61, :59], cur[:61, :59])
    assert (mf.block_rows, mf.block_cols) == (61 // 8, 59 // 8)
    v = mf.vectors.astype(float)
    assert np.array_equal(mf.magnitudes, np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2))
    assert np.abs(mf.vectors).max() <= 7


def test_flat_frames_tie_break_to_zero_vector():
    f = np.full((32, 32), 77, np.uint8)
    assert np.all(motion.three_step_search(f, f).vectors == 0)
    assert np.all(motion.full_search(f, f).vectors == 0)


def test_full_search_never_worse_than_three_step():
    prev, cur = _scene(9, 6, -5)
    fs = motion.full_search(prev, cur)
    ts = motion.three_step_search(prev, cur)
    assert np.all(motion.block_sad(prev, cur, fs) <= motion.block_sad(prev, cur, ts))


def test_input_validation():
    with pytest.raises(ValueError):
        motion.three_step_search(np.zeros((16, 16)), np.zeros((16, 24)))
    with pytest.raises(ValueError):
        motion.full_search(np.zeros((4, 16)), np.zeros((4, 16)))


@settings(max_examples=10, deadline=None)
@given(dx=st.integers(-7, 7), dy=st.integers(-7, 7), seed=st.integers(0, 1000))
def test_vectors_stay_in_range(dx, dy, seed):
    prev, cur = _scene(seed, dx, dy, size=32)
    for search in (motion.three_step_search, motion.full_search):
        v = search(prev, cur).vectors
        assert np.abs(v).max() <= 7
