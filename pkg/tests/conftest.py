import numpy as np
import pytest

from gridcast import maps
from gridcast.maps import random_blocks


@pytest.fixture
def grid4():
    return maps.grid4()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blocks64():
    return [random_blocks(64, 64, seed=s) for s in range(3)]


def random_queries(grid, n, seed):
    r = np.random.default_rng(seed)
    return r.random((n, 3)) * [grid.width, grid.height, 2 * np.pi]
