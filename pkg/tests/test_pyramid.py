import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vquemodes import pyramid as pyr


def _noise(shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


@pytest.mark.parametrize("shape", [(64, 64), (96, 128), (120, 120), (33, 47), (16, 16), (135, 240)])
def test_perfect_reconstruction(shape):
    x = _noise(shape)
    p = pyr.decompose(x)
    assert np.abs(pyr.reconstruct(p) - x).max() < 1e-10


@pytest.mark.parametrize("shape", [(64, 64), (96, 128), (17, 31)])
def test_tight_frame_energy(shape):
    x = _noise(shape, 3)
    p = pyr.decompose(x)
    # frame on the padded grid; zero padding adds no energy
    assert p.energy() == pytest.approx(float(np.sum(x ** 2)), rel=1e-9)


def test_constant_field_has_empty_bands():
    p = pyr.decompose(np.full((64, 80), 42.0))
    assert len(p.subbands) == 18
    assert max(np.abs(b).max() for b in p.subbands.values()) < 1e-9


def test_horizontal_frequency_lands_in_zero_degree_band():
    y, x = np.mgrid[0:128, 0:128]
    f = np.cos(2 * np.pi * x / 8.0)
    p = pyr.decompose(f)
    e = {t: np.sum(p.band(1, t) ** 2) for t in pyr.ORIENTATIONS_DEG}
    assert all(e[0] > 3 * e[t] for t in pyr.ORIENTATIONS_DEG if t)


def test_rotation_by_90_permutes_orientations():
    x = _noise((96, 96), 5)
    a, b = pyr.decompose(x), pyr.decompose(np.rot90(x))
    for s in range(1, 4):
        for k, t in enumerate(pyr.ORIENTATIONS_DEG):
            t2 = pyr.ORIENTATIONS_DEG[(k + 3) % 6]
            ea, eb = np.sum(a.band(s, t) ** 2), np.sum(b.band(s, t2) ** 2)
            assert eb == pytest.approx(ea, rel=0.01)


def test_band_shapes_and_canonical_index():
    p = pyr.decompose(_noise((135, 240)))
    assert p.band(1, 0).shape == (135, 240)
    assert p.band(2, 30).shape == (68, 120)
    assert p.band(3, 150).shape == (34, 60)
    keys = [(s, t) for s in (1, 2, 3) for t in (0, 30, 60, 90, 120, 150)]
    assert list(pyr.SUBBAND_KEYS) == keys
    assert [pyr.flat_index(s, t) for s, t in keys] == list(range(18))
    with pytest.raises(KeyError):
        pyr.flat_index(4, 0)
    with pytest.raises(KeyError):
        pyr.flat_index(1, 45)


def test_zero_and_linearity():
    a, b = _noise((64, 64), 1), _noise((64, 64), 2)
    pa, pb = pyr.decompose(a), pyr.decompose(b)
    assert np.abs(pyr.reconstruct(pa + pb) - (a + b)).max() < 1e-10
    zero = pa.map(np.zeros_like)
    assert np.all(pyr.reconstruct(zero) == 0)


def test_errors():
    with pytest.raises(ValueError):
        pyr.decompose(np.zeros((15, 64)))
    bad = np.zeros((32, 32))
    bad[3, 3] = np.nan
    with pytest.raises(ValueError):
        pyr.decompose(bad)
    with pytest.raises(ValueError):
        pyr.decompose(np.zeros((32, 32)), scales=4)
    p = pyr.decompose(_noise((32, 32)))
    del p.subbands[(2, 60)]
    with pytest.raises(KeyError):
        pyr.reconstruct(p)


@settings(max_examples=15, deadline=None)
@given(h=st.integers(16, 70), w=st.integers(16, 70), seed=st.integers(0, 10_000))
def test_reconstruction_property(h, w, seed):
    x = _noise((h, w), seed)
    assert np.abs(pyr.reconstruct(pyr.decompose(x)) - x).max() < 1e-9
