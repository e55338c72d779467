import numpy as np
import pytest

from lima.core import Division, RasterImage, RegionMask
from lima.division import divide_grid


def make_image(height=4, width=4, channels=1, seed=0, positive=True):
    """Random test image; `positive` keeps every pixel strictly above 0 so
    presence checks are unambiguous."""
    rng = np.random.default_rng(seed)
    low = 0.05 if positive else 0.0
    return RasterImage(rng.uniform(low, 1.0, size=(height, width, channels)))


def grid_division(image, rows, cols):
    return divide_grid(image, rows, cols)


@pytest.fixture
def image4x4():
    return make_image(4, 4, 1, seed=1)


@pytest.fixture
def quad_division(image4x4):
    return divide_grid(image4x4, 2, 2)
