import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import fixtures


@pytest.fixture(scope="session")
def rotation():
    return cl.circle_rotation()


@pytest.fixture(scope="session")
def A32():
    return fixtures.example_block_diagonal(32)


@pytest.fixture(scope="session")
def split32():
    return fixtures.example_splitting(32)


@pytest.fixture(scope="session")
def x0():
    return np.array([0.123])
