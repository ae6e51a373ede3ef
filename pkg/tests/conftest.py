import itertools

import numpy as np
import pytest

from hedlund.curves import build_curve_system
from hedlund.metric import calibrate_constants
from hedlund.polytope import from_vertices
from hedlund.solver.grid import build_grid

OCTAHEDRON = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
CUBE = list(itertools.product((1, -1), repeat=3))


@pytest.fixture(scope="session")
def octahedron():
    return from_vertices(OCTAHEDRON)


@pytest.fixture(scope="session")
def cube():
    return from_vertices(CUBE)


@pytest.fixture(scope="session")
def octa_metric(octahedron):
    C = build_curve_system(octahedron.classes)
    return calibrate_constants(octahedron, C, res=64)


@pytest.fixture(scope="session")
def cube_metric(cube):
    C = build_curve_system(cube.classes)
    return calibrate_constants(cube, C, res=64)


@pytest.fixture(scope="session")
def octa_graph8(octa_metric):
    return build_grid(octa_metric, 8, 2)


@pytest.fixture(scope="session")
def octa_graph16(octa_metric):
    return build_grid(octa_metric, 16, 2)


@pytest.fixture(scope="session")
def cube_graph16(cube_metric):
    return build_grid(cube_metric, 16, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
