import numpy as np
import pytest

from roughevo import AreaOperator, TimeGrid, generate_fbm, laplacian_operator, make_example_G


@pytest.fixture
def op4():
    return laplacian_operator(4)


@pytest.fixture
def fbm_pair(op4):
    grid = TimeGrid(1.0, 32)
    omega = generate_fbm(0.45, op4, grid, seed=3)
    u = generate_fbm(0.45, op4, grid, seed=4)
    return omega, u


@pytest.fixture
def area_op(op4, fbm_pair):
    return AreaOperator(fbm_pair[0], op4)


@pytest.fixture
def G4(op4):
    return make_example_G(op4, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
