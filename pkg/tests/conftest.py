import numpy as np
import pytest

from nlh.grid import Grid, from_callable
from nlh.presets import fractional_heat


@pytest.fixture(scope="session")
def grid384():
    return Grid(1, 12.0, 384)


@pytest.fixture(scope="session")
def grid256():
    return Grid(1, 8.0, 256)


@pytest.fixture(scope="session")
def heat05():
    return fractional_heat(0.5)


@pytest.fixture(scope="session")
def heat15():
    return fractional_heat(1.5)


@pytest.fixture
def gaussian_pair(grid384):
    f = from_callable(grid384, lambda x: np.exp(-((x - 1.0) ** 2)))
    g = from_callable(grid384, lambda x: np.exp(-((x + 2.0) ** 2) / 2.0))
    return f, g
