import numpy as np
import pytest

from vquemodes import spatial, synthgen


@pytest.fixture(scope="session")
def pristine_model():
    """Pristine spatial model from textures disjoint from the test scenes."""
    frames = [synthgen.render_texture(256, 256, 5000 + i) for i in range(10)]
    return spatial.train_pristine(frames, patch_size=32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
