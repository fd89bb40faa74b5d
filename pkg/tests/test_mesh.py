import math
from itertools import permutations

import numpy as np
import pytest

from core.errors import (
    DanglingVertexError,
    DegenerateElementError,
    DuplicateElementError,
    DuplicateIdError,
    FlatBoxError,
    InvalidIdError,
    NonFiniteCoordinateError,
    UnknownElementError,
    VertexInUseError,
)
from core.mesh import (
    Mesh,
    RepresentationMode,
    Tetrahedron,
    Vertex,
    ViolationKind,
    bounding_box,
    canonicalize,
    signed_volume,
    validate_mesh,
)
from tests.conftest import UNIT_TET, make_mesh


def test_add_vertex_and_duplicate():
    m = Mesh()
    m.add_vertex(Vertex(1, 0.0, 0.0, 0.0))
    assert m.vertex_count == 1
    with pytest.raises(DuplicateIdError):
        m.add_vertex(Vertex(1, 1.0, 0.0, 0.0))
    assert m.get_vertex(1).coords == (0.0, 0.0, 0.0)


def test_add_vertex_rejects_nan_and_bad_ids():
    m = Mesh()
    with pytest.raises(NonFiniteCoordinateError):
        m.add_vertex(Vertex(2, math.nan, 0.0, 0.0))
    with pytest.raises(NonFiniteCoordinateError):
        m.add_vertex(Vertex(3, 0.0, math.inf, 0.0))
    with pytest.raises(InvalidIdError):
        m.add_vertex(Vertex(0, 0.0, 0.0, 0.0))
    assert m.vertex_count == 0


def test_add_tetrahedron_constraints(unit_tet):
    m = unit_tet
    assert m.corners_of(1) == (1, 2, 3, 4)

    with pytest.raises(DuplicateElementError):
        m.add_tetrahedron(2, (2, 1, 3, 4))
    with pytest.raises(DegenerateElementError):
        m.add_tetrahedron(3, (1, 1, 2, 3))
    with pytest.raises(DanglingVertexError):
        m.add_tetrahedron(4, (1, 2, 3, 99))
    with pytest.raises(DuplicateIdError):
        m.add_tetrahedron(1, (1, 2, 3, 4))
    assert m.element_count == 1


def test_unchecked_insert_keeps_only_primary_key():
    m = make_mesh(UNIT_TET)
    m.add_tetrahedron(1, (1, 2, 3, 99), check=False)
    m.add_tetrahedron(2, (1, 1, 2, 3), check=False)
    with pytest.raises(DuplicateIdError):
        m.add_tetrahedron(2, (1, 2, 3, 4), check=False)
    assert m.element_count == 2


@pytest.mark.parametrize("corners, parity", [
    ((1, 2, 3, 4), 1),
    ((2, 1, 3, 4), -1),
    ((4, 2, 3, 1), -1),
    ((4, 3, 2, 1), 1),
])
def test_canonicalize_parity(corners, parity):
    key = canonicalize(corners)
    assert key.sorted == (1, 2, 3, 4)
    assert key.parity == parity


def test_canonicalize_repeated_corner():
    with pytest.raises(DegenerateElementError):
        canonicalize((5, 6, 5, 7))


def test_signed_volume_orientation():
    m = make_mesh(UNIT_TET + [(5, 1.0, 1.0, 0.0)])
    assert signed_volume(Tetrahedron(1, (1, 2, 3, 4)), m) == pytest.approx(1 / 6)
    assert signed_volume(Tetrahedron(2, (2, 1, 3, 4)), m) == pytest.approx(-1 / 6)
    assert signed_volume(Tetrahedron(3, (1, 2, 3, 5)), m) == 0.0


def test_signed_volume_dangling():
    m = make_mesh(UNIT_TET)
    with pytest.raises(DanglingVertexError):
        signed_volume(Tetrahedron(1, (1, 2, 3, 42)), m)


def test_bounding_box_of_translated_tet():
    shifted = [(vid, x + 2.0, y - 1.0, z + 0.5) for vid, x, y, z in UNIT_TET]
    m = make_mesh(shifted, [(1, (1, 2, 3, 4))])
    cell = bounding_box(m.get_element(1), m)
    assert (cell.x_min, cell.y_min, cell.z_min) == (2.0, -1.0, 0.5)
    assert (cell.x_max, cell.y_max, cell.z_max) == (3.0, 0.0, 1.5)
    assert cell.is_valid()


def test_bounding_box_flat():
    m = make_mesh(UNIT_TET[:3] + [(4, 1.0, 1.0, 0.0)])
    with pytest.raises(FlatBoxError):
        bounding_box(Tetrahedron(1, (1, 2, 3, 4)), m)


def test_validate_cube_is_clean(cube3):
    report = validate_mesh(cube3)
    assert report.is_clean
    assert report.warnings == []


def test_validate_reports_dangling_vertex(cube3):
    m = make_mesh([(v.id, v.x, v.y, v.z) for v in cube3.vertices.values()])
    for t in cube3.iter_elements():
        m.add_tetrahedron(t.id, t.corners)
    m.add_tetrahedron(10_000, (1, 2, 5, 999), check=False)

    report = validate_mesh(m)
    assert report.count(ViolationKind.DANGLING_VERTEX) == 1
    violation = report.violations[0]
    assert violation.elem_id == 10_000
    assert violation.vertex_id == 999


def test_validate_reports_later_duplicate():
    m = make_mesh(UNIT_TET)
    m.add_tetrahedron(1, (1, 2, 3, 4), check=False)
    m.add_tetrahedron(2, (4, 3, 2, 1), check=False)

    report = validate_mesh(m)
    assert report.count(ViolationKind.DUPLICATE_ELEMENT) == 1
    assert report.violations[0].elem_id == 2
    assert "duplicates=1" in report.lines()[0]


def test_validate_reports_each_fuzz_class_once():
    m = Mesh()
    for row in UNIT_TET:
        m.add_vertex(Vertex(*row))
    m.add_vertex(Vertex(9, math.nan, 0.0, 0.0), check=False)
    m.add_tetrahedron(1, (1, 2, 3, 4), check=False)
    m.add_tetrahedron(2, (1, 2, 3, 77), check=False)
    m.add_tetrahedron(3, (1, 1, 2, 3), check=False)
    m.add_tetrahedron(4, (2, 1, 4, 3), check=False)

    report = validate_mesh(m)
    assert len(report.violations) == 4
    for kind in (ViolationKind.NON_FINITE_COORDINATE, ViolationKind.DANGLING_VERTEX,
                 ViolationKind.DEGENERATE_ELEMENT, ViolationKind.DUPLICATE_ELEMENT):
        assert report.count(kind) == 1


def test_coplanar_element_is_a_warning():
    m = make_mesh(UNIT_TET[:3] + [(4, 1.0, 1.0, 0.0)])
    m.add_tetrahedron(1, (1, 2, 3, 4))

    report = validate_mesh(m)
    assert report.is_clean
    assert [w.kind for w in report.warnings] == [ViolationKind.GEOMETRIC_DEGENERACY]
    assert report.lines()[0].startswith("warning=geometric-degeneracy")


def test_remove_vertex_in_use(unit_tet):
    with pytest.raises(VertexInUseError):
        unit_tet.remove_vertex(1)
    unit_tet.remove_element(1)
    unit_tet.remove_vertex(1)
    assert 1 not in unit_tet.vertices
    with pytest.raises(UnknownElementError):
        unit_tet.corners_of(1)


def test_removed_element_frees_its_key(unit_tet):
    unit_tet.remove_element(1)
    unit_tet.add_tetrahedron(2, (4, 3, 2, 1))
    assert unit_tet.parity[2] == 1


@pytest.mark.parametrize("mode", list(RepresentationMode))
def test_set_mode_preserves_elements(cube3, mode):
    m = make_mesh([(v.id, v.x, v.y, v.z) for v in cube3.vertices.values()])
    for t in cube3.iter_elements():
        m.add_tetrahedron(t.id, t.corners)
    m.set_mode(mode)
    assert m.mode == mode
    assert [t.corners for t in m.iter_elements()] == [t.corners for t in cube3.iter_elements()]
    assert (m.quadruples is None) == (mode == RepresentationMode.NORMALIZED)
    assert (m.incidence is None) == (mode == RepresentationMode.QUADRUPLE)


def test_global_bounds(cube3):
    lo, hi = cube3.global_bounds()
    assert np.allclose(lo, 0.0)
    assert np.allclose(hi, 1.0)


def test_signed_volume_over_all_corner_orders():
    m = make_mesh(UNIT_TET)
    volumes = [signed_volume(Tetrahedron(1, order), m) for order in permutations((1, 2, 3, 4))]
    assert sum(1 for v in volumes if v == pytest.approx(1 / 6)) == 12
    assert sum(1 for v in volumes if v == pytest.approx(-1 / 6)) == 12
    for order, volume in zip(permutations((1, 2, 3, 4)), volumes):
        assert (volume > 0) == (canonicalize(order).parity == 1)
