import numpy as np
import pytest

from cournot import ArcQuadraticCost, Grid1D, quarter_disk, uniform_measure


@pytest.fixture(scope="session")
def quad_cost():
    return ArcQuadraticCost()


@pytest.fixture(scope="session")
def cloud_small():
    """Deterministic 900-point quadrature cloud, shared by fast tests."""
    return quarter_disk(900)


@pytest.fixture(scope="session")
def cloud_medium():
    return quarter_disk(2500)


@pytest.fixture(scope="session")
def grid_half_pi():
    return Grid1D(0.0, np.pi / 2, 200)


@pytest.fixture(scope="session")
def uniform_half_pi(grid_half_pi):
    return uniform_measure(grid_half_pi)
