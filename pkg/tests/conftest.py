import numpy as np
import pytest

from src.fracgrid import Grid2D, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_line():
    return make_grid(0.0, 1.0, 64)


@pytest.fixture
def unit_square():
    return Grid2D(make_grid(0.0, 1.0, 16), make_grid(0.0, 1.0, 16))
