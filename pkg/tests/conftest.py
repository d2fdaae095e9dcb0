import numpy as np
import pytest

from dibm import GridSpec, Params


@pytest.fixture(scope="session")
def params():
    return Params()


@pytest.fixture(scope="session")
def spec():
    return GridSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
