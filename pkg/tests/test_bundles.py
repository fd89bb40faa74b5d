import os

import pandas as pd
import pytest

from core.bundles import (
    HEADER_SCHEMA,
    SECTION_FILES,
    gather,
    read_bundle,
    reassemble_mesh,
    scatter,
    write_result_bundle,
)
from core.errors import DuplicateKeyError, GraphMeshMismatchError, MalformedBundleError
from core.partition import PartitionMap, compute_halos, rcb, refine
from core.tabular import TableKind, TabularFile, read_tabular, schema, table_of, write_tabular
from core.views import element_adjacency_graph


def refined_map(m, parts):
    return refine(element_adjacency_graph(m), rcb(m, parts))


def test_scatter_then_reassemble(tmp_path, cube3):
    pm = refined_map(cube3, 8)
    paths = scatter(cube3, pm, compute_halos(cube3, pm), str(tmp_path / "bundles"))
    assert [os.path.basename(p) for p in paths] == [f"part-{p:04d}" for p in range(8)]

    bundles = [read_bundle(p) for p in paths]
    assert sum(len(b.elements) for b in bundles) == cube3.element_count
    assert all(b.stage == "refined" for b in bundles)

    rebuilt = reassemble_mesh(bundles)
    for kind in (TableKind.VERTICES, TableKind.ELEMENTS):
        assert table_of(rebuilt, kind).rows == table_of(cube3, kind).rows


def test_single_partition_bundle(tmp_path, unit_tet):
    pm = PartitionMap({1: 0}, 1)
    [path] = scatter(unit_tet, pm, compute_halos(unit_tet, pm), str(tmp_path))
    bundle = read_bundle(path)
    assert bundle.ghosts == []
    assert bundle.counts() == (4, 1, 0, 0)


def test_bundle_carries_resolved_attributes(tmp_path, two_region):
    m, store = two_region
    pm = rcb(m, 2)
    paths = scatter(m, pm, compute_halos(m, pm), str(tmp_path), store=store)
    for part, path in enumerate(paths):
        bundle = read_bundle(path)
        assert len(bundle.attributes) == len(pm.members(part))
        assert {row[1] for row in bundle.attributes} == {"conductivity"}
        assert {row[3] for row in bundle.attributes} <= {"5.0", "7.0"}


def test_scatter_rejects_foreign_halos(tmp_path, cube3):
    pm = rcb(cube3, 4)
    halos = compute_halos(cube3, rcb(cube3, 2))
    with pytest.raises(GraphMeshMismatchError):
        scatter(cube3, pm, halos, str(tmp_path))


def test_read_bundle_checks_header_counts(tmp_path, face_pair):
    pm = PartitionMap({1: 0, 2: 1}, 2)
    paths = scatter(face_pair, pm, compute_halos(face_pair, pm), str(tmp_path))
    header_path = os.path.join(paths[0], SECTION_FILES["header"])
    header = read_tabular(header_path, HEADER_SCHEMA)
    write_tabular(header_path, TabularFile(HEADER_SCHEMA, [header.rows[0][:4] + (99, 1, 3, 0)]))
    with pytest.raises(MalformedBundleError):
        read_bundle(paths[0])

    os.remove(os.path.join(paths[1], SECTION_FILES["ghosts"]))
    with pytest.raises(MalformedBundleError):
        read_bundle(paths[1])


def write_results(root, parts=8, per_part=100, states=2):
    dirs = []
    for part in range(parts):
        rows = [(part * per_part + i + 1, 0, float(part), i / 7.0) for i in range(per_part)]
        # Write out of key order so gather has something to sort
        dirs.append(write_result_bundle(str(root / f"part-{part:04d}"), list(reversed(rows)), states))
    return dirs


def test_gather_with_any_loader_count(tmp_path):
    dirs = write_results(tmp_path / "results")
    one = gather(dirs, str(tmp_path / "staging-1"), loader_concurrency=1)
    four = gather(dirs, str(tmp_path / "staging-4"), loader_concurrency=4)

    assert len(one) == 800
    assert list(one.columns) == ["elem_id", "sample", "s0", "s1"]
    assert one["elem_id"].is_monotonic_increasing
    pd.testing.assert_frame_equal(one, four)
    assert len(os.listdir(tmp_path / "staging-4")) == 8


def test_gather_rejects_duplicate_keys(tmp_path):
    dirs = write_results(tmp_path / "results", parts=2)
    with pytest.raises(DuplicateKeyError) as exc:
        gather(dirs + dirs[:1], str(tmp_path / "staging"))
    assert exc.value.context["sample"] == 0


def test_gather_rejects_malformed_results(tmp_path):
    dirs = write_results(tmp_path / "results", parts=2)
    with pytest.raises(MalformedBundleError):
        gather(dirs + [str(tmp_path / "empty")], str(tmp_path / "staging"))

    bad = tmp_path / "bad"
    write_tabular(str(bad / "results.csv"), TabularFile(schema("elem_id:int", "step:int"), [(1, 1)]))
    with pytest.raises(MalformedBundleError):
        gather([str(bad)], str(tmp_path / "staging-bad"))


def test_gather_rejects_mixed_state_widths(tmp_path):
    a = write_result_bundle(str(tmp_path / "a"), [(1, 0, 1.0)], 1)
    b = write_result_bundle(str(tmp_path / "b"), [(2, 0, 1.0, 2.0)], 2)
    with pytest.raises(MalformedBundleError):
        gather([a, b], str(tmp_path / "staging"))
