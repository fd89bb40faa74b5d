import json

import pytest

from core.attributes import (
    AttributeBinding,
    AttributeStore,
    CoordinateSystem,
    MeshEntityKind,
    TopoEntity,
    TopoKind,
    ValueKind,
    decode_value,
    encode_value,
)
from core.errors import (
    AmbiguousInheritanceError,
    DuplicateIdError,
    DuplicateNameError,
    InvalidAttributeError,
    NotFoundError,
    UnknownEntityError,
    WorkspaceError,
)

REGION_1 = TopoEntity(TopoKind.REGION, 1)
REGION_2 = TopoEntity(TopoKind.REGION, 2)
FACE_1 = TopoEntity(TopoKind.FACE, 1)


def left_and_right(m):
    left = [t.id for t in m.iter_elements() if m.centroid(t.id)[0] < 0.5]
    right = [t.id for t in m.iter_elements() if m.centroid(t.id)[0] >= 0.5]
    return left, right


def interface_store(scope):
    """Two regions sharing face 1, both binding conductivity with `scope`"""
    store = AttributeStore()
    store.topology.add(TopoKind.FACE, 1)
    store.topology.add(TopoKind.REGION, 1, boundary=[1])
    store.topology.add(TopoKind.REGION, 2, boundary=[1])
    store.assign(REGION_1, AttributeBinding("conductivity", 5.0, scope=scope))
    store.assign(REGION_2, AttributeBinding("conductivity", 7.0, scope=scope))
    store.classification.classify_vertex(10, FACE_1)
    return store


def test_assign_and_duplicate_name():
    store = interface_store({TopoKind.REGION})
    assert store.binding(REGION_1, "conductivity").value == 5.0
    with pytest.raises(DuplicateNameError):
        store.assign(REGION_1, AttributeBinding("conductivity", 6.0))
    assert store.names() == ["conductivity"]


def test_assign_to_unknown_entity():
    store = interface_store({TopoKind.REGION})
    with pytest.raises(UnknownEntityError):
        store.assign(TopoEntity(TopoKind.FACE, 99), AttributeBinding("heat_flux", 1.0))


def test_topology_constraints():
    store = AttributeStore()
    store.topology.add(TopoKind.VERTEX, 1)
    with pytest.raises(UnknownEntityError):
        store.topology.add(TopoKind.EDGE, 1, boundary=[2])
    store.topology.add(TopoKind.EDGE, 1, boundary=[1])
    with pytest.raises(DuplicateIdError):
        store.topology.add(TopoKind.EDGE, 1)
    with pytest.raises(InvalidAttributeError):
        store.topology.add(TopoKind.VERTEX, 2, boundary=[1])
    with pytest.raises(InvalidAttributeError):
        store.topology.add(TopoKind.REGION, 0)


def test_two_region_resolution(two_region):
    m, store = two_region
    left, right = left_and_right(m)
    assert left and right

    for elem_id in left:
        resolved = store.resolve_element(elem_id, "conductivity")
        assert resolved.value == 5.0
        assert resolved.provenance == REGION_1
        assert resolved.distance == 0
    for elem_id in right:
        assert store.resolve(MeshEntityKind.ELEMENT, elem_id, "conductivity").value == 7.0


def test_region_scope_does_not_reach_a_face_vertex():
    store = interface_store({TopoKind.REGION})
    with pytest.raises(NotFoundError):
        store.resolve_vertex(10, "conductivity")


def test_same_distance_is_ambiguous():
    store = interface_store({TopoKind.REGION, TopoKind.FACE})
    with pytest.raises(AmbiguousInheritanceError):
        store.resolve_vertex(10, "conductivity")


def test_nearer_binding_wins():
    store = interface_store({TopoKind.REGION, TopoKind.FACE})
    store.assign(FACE_1, AttributeBinding("conductivity", 6.0, scope={TopoKind.FACE}))

    resolved = store.resolve_vertex(10, "conductivity")
    assert resolved.value == 6.0
    assert resolved.provenance == FACE_1
    assert resolved.distance == 0


def test_inheritance_walks_up_several_levels():
    store = AttributeStore()
    store.topology.add(TopoKind.VERTEX, 1)
    store.topology.add(TopoKind.EDGE, 1, boundary=[1])
    store.topology.add(TopoKind.FACE, 1, boundary=[1])
    store.topology.add(TopoKind.REGION, 1, boundary=[1])
    store.assign(REGION_1, AttributeBinding("temperature", 300.0, scope={TopoKind.VERTEX}))
    store.classification.classify_vertex(5, TopoEntity(TopoKind.VERTEX, 1))

    resolved = store.resolve_vertex(5, "temperature")
    assert resolved.value == 300.0
    assert resolved.distance == 3


def test_unclassified_entity_is_not_found(two_region):
    _, store = two_region
    with pytest.raises(NotFoundError):
        store.resolve_element(10_000, "conductivity")
    with pytest.raises(NotFoundError):
        store.resolve_vertex(1, "conductivity")


def test_resolve_all_reports_gaps(two_region):
    m, store = two_region
    store.topology.add(TopoKind.REGION, 3)
    extra = max(m.element_ids) + 1
    store.classification.classify_element(extra, 3)

    ids = sorted(m.element_ids) + [extra]
    table = store.resolve_all(ids)
    assert len(table.rows) == m.element_count
    assert table.unresolved == [(extra, "conductivity", "not-found")]
    assert table.report_lines() == [f"unresolved elem_id={extra} name=conductivity error=not-found"]

    frame = table.to_frame()
    assert list(frame.columns) == ["elem_id", "name", "kind", "value", "context", "source_kind", "source_id"]
    assert set(frame["value"]) == {"5.0", "7.0"}
    assert set(frame["source_id"]) == {1, 2}


def test_group_members():
    store = interface_store({TopoKind.REGION})
    store.assign(REGION_1, AttributeBinding("density", 2.5, group="material-a"))
    store.assign(REGION_2, AttributeBinding("density", 7.8, group="material-b"))
    store.assign(REGION_2, AttributeBinding("youngs_modulus", 2e11, group="material-b"))
    assert store.group_members("material-b") == [(REGION_2, "density"), (REGION_2, "youngs_modulus")]
    assert store.group_members("missing") == []


@pytest.mark.parametrize("value", [float("nan"), float("inf"), (), (1.0, float("nan")), None])
def test_invalid_values(value):
    with pytest.raises(InvalidAttributeError):
        AttributeBinding("bad", value)


def test_binding_validation():
    with pytest.raises(InvalidAttributeError):
        AttributeBinding("", 1.0)
    with pytest.raises(InvalidAttributeError):
        AttributeBinding("k", 1.0, scope=frozenset())
    with pytest.raises(InvalidAttributeError):
        AttributeBinding("k", 1.0, samples=[(0.0, 1.0)])

    b = AttributeBinding("velocity", [1, 2, 3], context=CoordinateSystem.CYLINDRICAL,
                         time_dependent=True, samples=[(0.0, 1.0), (1.0, 2.0)])
    assert b.value == (1.0, 2.0, 3.0)
    assert b.kind == ValueKind.VECTOR


def test_value_text_form():
    assert encode_value(0.1) == "0.1"
    assert encode_value((1.0, -2.5)) == "1.0;-2.5"
    assert decode_value(ValueKind.VECTOR, "1.0;-2.5") == (1.0, -2.5)
    assert decode_value(ValueKind.EXPRESSION, "3*t") == "3*t"


def test_entity_references():
    assert TopoEntity.parse("region:1") == REGION_1
    assert str(FACE_1) == "face:1"
    assert sorted([FACE_1, REGION_2, REGION_1]) == [REGION_1, REGION_2, FACE_1]
    for text in ("region", "region:x", "volume:1", "face:0"):
        with pytest.raises(InvalidAttributeError):
            TopoEntity.parse(text)


def test_save_and_load(tmp_path, two_region):
    m, store = two_region
    store.classification.classify_vertex(1, FACE_1)
    store.assign(FACE_1, AttributeBinding("flux", (0.0, 0.0, 1.0), scope={TopoKind.FACE},
                                          group="bc", time_dependent=True, samples=[(0.5, (0.0, 0.0, 2.0))]))
    path = tmp_path / "attributes.json"
    store.save(str(path))

    loaded = AttributeStore.load(str(path))
    assert loaded.to_dict() == store.to_dict()
    assert loaded.resolve_vertex(1, "flux").value == (0.0, 0.0, 1.0)
    some_elem = next(iter(m.element_ids))
    assert loaded.resolve_element(some_elem, "conductivity") == store.resolve_element(some_elem, "conductivity")


def test_load_malformed(tmp_path):
    path = tmp_path / "attributes.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(WorkspaceError):
        AttributeStore.load(str(path))
    path.write_text(json.dumps({"bindings": [{"name": "x"}]}), encoding="utf-8")
    with pytest.raises(WorkspaceError):
        AttributeStore.load(str(path))
