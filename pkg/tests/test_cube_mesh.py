import pytest

from core.errors import InvalidQueryError
from core.mesh import RepresentationMode, signed_volume, validate_mesh
from utils.cube_mesh import generate_cube_mesh, vertex_id


@pytest.mark.parametrize("n, vertices, elements", [(1, 8, 6), (3, 64, 162), (10, 1331, 6000)])
def test_cube_counts(n, vertices, elements):
    m = generate_cube_mesh(n)
    assert m.vertex_count == vertices
    assert m.element_count == elements


def test_cube_orientation_and_volume(cube3):
    volumes = [signed_volume(t, cube3) for t in cube3.iter_elements()]
    assert all(v > 0 for v in volumes)
    assert sum(volumes) == pytest.approx(1.0)


def test_cube_ids():
    m = generate_cube_mesh(2)
    assert m.get_vertex(vertex_id(2, 2, 2, 2)).coords == (1.0, 1.0, 1.0)
    assert sorted(m.element_ids) == list(range(1, 49))


def test_cube_in_normalized_mode():
    m = generate_cube_mesh(2, RepresentationMode.NORMALIZED)
    assert m.quadruples is None
    assert len(m.incidence) == 4 * 48
    assert validate_mesh(m).is_clean


@pytest.mark.parametrize("n", [0, -2, 1.5])
def test_cube_rejects_bad_sizes(n):
    with pytest.raises(InvalidQueryError):
        generate_cube_mesh(n)
