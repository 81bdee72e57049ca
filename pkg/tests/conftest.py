import numpy as np
import pytest

from compactkdv.domain import make_grid


@pytest.fixture(scope="session")
def grid600():
    return make_grid(600, 2.0)


@pytest.fixture(scope="session")
def grid400():
    return make_grid(400, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
