import numpy as np
import pytest

from solver.services.geometry import build_boundary
from solver.services.grid import build_grid, classify_nodes, find_intersections

UNIT_BOX = (-1.2, 1.2, -1.2, 1.2)


@pytest.fixture
def unit_circle():
    return build_boundary("circle", {"r": 1.0})


@pytest.fixture
def star():
    return build_boundary("star", {"r": 1.0, "c": 0.2, "m": 4})


@pytest.fixture
def coarse_grid():
    """8 x 8 cells on [-1.2, 1.2]^2, h = 0.3."""
    return build_grid(UNIT_BOX, 8, 8)


@pytest.fixture
def coarse_classification(coarse_grid, unit_circle):
    return classify_nodes(coarse_grid, unit_circle)


@pytest.fixture
def coarse_intersections(coarse_grid, coarse_classification, unit_circle):
    return find_intersections(coarse_grid, coarse_classification, unit_circle)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
