import numpy as np
import pytest

from core.mesh import Mesh, Vertex
from utils.cube_mesh import build_two_region_store, generate_cube_mesh

UNIT_TET = [(1, 0.0, 0.0, 0.0), (2, 1.0, 0.0, 0.0), (3, 0.0, 1.0, 0.0), (4, 0.0, 0.0, 1.0)]


def make_mesh(vertices, elements=()):
    m = Mesh()
    for row in vertices:
        m.add_vertex(Vertex(*row))
    for elem_id, corners in elements:
        m.add_tetrahedron(elem_id, corners)
    return m


@pytest.fixture
def unit_tet():
    return make_mesh(UNIT_TET, [(1, (1, 2, 3, 4))])


@pytest.fixture
def face_pair():
    """Two tets sharing the face (2, 3, 4)"""
    vertices = UNIT_TET + [(5, 1.0, 1.0, 1.0)]
    return make_mesh(vertices, [(1, (1, 2, 3, 4)), (2, (5, 3, 2, 4))])


@pytest.fixture(scope="session")
def cube3():
    return generate_cube_mesh(3)


@pytest.fixture(scope="session")
def cube5():
    return generate_cube_mesh(5)


@pytest.fixture(scope="session")
def cube10():
    return generate_cube_mesh(10)


@pytest.fixture
def two_region():
    m = generate_cube_mesh(2)
    return m, build_two_region_store(m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
