import math
from itertools import combinations

import pytest

from core.errors import EmptyMeshError, GraphMeshMismatchError, InvalidPartitionCountError
from core.mesh import Mesh
from core.partition import (
    PartitionMap,
    PartitionStage,
    balance_report,
    bootstrap_groups,
    compute_halos,
    edge_cut,
    rcb,
    refine,
    split_largest,
)
from core.views import element_adjacency_graph, graph_edges
from tests.conftest import make_mesh
from utils.cube_mesh import generate_cube_mesh


def collinear_tets(count):
    vertices, elements = [], []
    for i in range(count):
        base = 4 * i
        x = 2.0 * i
        vertices += [(base + 1, x, 0.0, 0.0), (base + 2, x + 1, 0.0, 0.0),
                     (base + 3, x, 1.0, 0.0), (base + 4, x, 0.0, 1.0)]
        elements.append((i + 1, (base + 1, base + 2, base + 3, base + 4)))
    return make_mesh(vertices, elements)


def path_graph(n):
    return {i: {j for j in (i - 1, i + 1) if 1 <= j <= n} for i in range(1, n + 1)}


def test_rcb_splits_along_the_long_axis():
    pm = rcb(collinear_tets(8), parts=2)
    assert pm.members(0) == [1, 2, 3, 4]
    assert pm.members(1) == [5, 6, 7, 8]
    assert pm.stage == PartitionStage.BOOTSTRAP


@pytest.mark.parametrize("n", [3, 5, 10])
@pytest.mark.parametrize("parts", [2, 4, 8, 16])
def test_rcb_balance(n, parts):
    m = generate_cube_mesh(n)
    sizes = rcb(m, parts).sizes()
    assert sum(sizes) == m.element_count
    assert max(sizes) <= math.ceil(m.element_count / parts)
    assert min(sizes) >= m.element_count // parts


def test_rcb_is_deterministic(cube3):
    assert rcb(cube3, 8).assignment == rcb(cube3, 8).assignment


@pytest.mark.parametrize("parts", [0, 3, 6])
def test_rcb_rejects_non_power_of_two(cube3, parts):
    with pytest.raises(InvalidPartitionCountError):
        rcb(cube3, parts)


def test_rcb_empty_mesh():
    with pytest.raises(EmptyMeshError):
        rcb(Mesh(), 2)


def test_edge_cut_matches_brute_force(cube3, rng):
    g = element_adjacency_graph(cube3)
    ids = sorted(g)
    assignment = {e: int(p) for e, p in zip(ids, rng.integers(0, 4, size=len(ids)))}
    pm = PartitionMap(assignment, 4)
    expected = sum(1 for u in g for v in g[u] if u < v and assignment[u] != assignment[v])
    assert edge_cut(g, pm) == expected
    assert edge_cut(g, PartitionMap({e: 0 for e in ids}, 1)) == 0


def test_edge_cut_rejects_foreign_map():
    g = path_graph(4)
    with pytest.raises(GraphMeshMismatchError):
        edge_cut(g, PartitionMap({1: 0, 2: 0, 3: 1}, 2))
    with pytest.raises(GraphMeshMismatchError):
        edge_cut(g, PartitionMap({1: 0, 2: 0, 3: 1, 4: 2}, 2))


def test_refine_keeps_an_optimal_split():
    g = {}
    for clique in ((1, 2, 3, 4), (5, 6, 7, 8)):
        for u in clique:
            g[u] = {v for v in clique if v != u}
    g[4].add(5)
    g[5].add(4)
    boot = PartitionMap({e: 0 if e <= 4 else 1 for e in g}, 2)

    refined = refine(g, boot)
    assert refined.assignment == boot.assignment
    assert edge_cut(g, refined) == 1
    assert refined.stage == PartitionStage.REFINED


def test_refine_untangles_an_alternating_path():
    g = path_graph(10)
    boot = PartitionMap({e: e % 2 for e in g}, 2)
    assert edge_cut(g, boot) == 9

    refined = refine(g, boot)
    assert edge_cut(g, refined) <= 1
    assert refined.sizes() == [5, 5]


@pytest.mark.parametrize("n", [3, 5, 7])
def test_refine_never_worsens_the_cut(n):
    m = generate_cube_mesh(n)
    g = element_adjacency_graph(m)
    boot = rcb(m, 8)

    refined = refine(g, boot, imbalance=1.05)
    assert edge_cut(g, refined) <= edge_cut(g, boot)
    assert max(refined.sizes()) <= 1.05 * m.element_count / 8
    assert sorted(refined.assignment) == sorted(boot.assignment)


def test_refine_to_more_partitions(cube3):
    g = element_adjacency_graph(cube3)
    boot = rcb(cube3, 2)
    refined = refine(g, boot, target=8)
    assert refined.parts == 8
    assert sum(refined.sizes()) == cube3.element_count
    groups = bootstrap_groups(refined)
    assert sorted(groups) == [0, 1]
    assert sorted(p for parts in groups.values() for p in parts) == list(range(8))


def test_refine_rejects_fewer_partitions(cube3):
    g = element_adjacency_graph(cube3)
    with pytest.raises(InvalidPartitionCountError):
        refine(g, rcb(cube3, 4), target=2)


def test_split_largest_records_ancestry():
    g = path_graph(12)
    boot = PartitionMap({e: 0 if e <= 8 else 1 for e in g}, 2)
    split = split_largest(boot, 3, g)
    assert split.parts == 3
    assert split.ancestors == {0: 0, 1: 1, 2: 0}
    assert sorted(split.sizes()) == [4, 4, 4]
    assert boot.parts == 2


def test_balance_report_lines(cube3):
    g = element_adjacency_graph(cube3)
    report = balance_report(g, rcb(cube3, 2))
    lines = report.lines()
    assert lines[0].startswith("stage=bootstrap parts=2 edge_cut=")
    assert lines[1:] == ["partition=0 elements=81", "partition=1 elements=81"]
    assert report.imbalance == pytest.approx(1.0)


def test_halo_of_a_single_partition(cube3):
    halos = compute_halos(cube3, PartitionMap({e: 0 for e in cube3.element_ids}, 1))
    assert halos[0].ghosts == set()
    assert halos[0].required == set(cube3.vertices)
    assert halos[0].owned == sorted(cube3.element_ids)


def test_halo_across_a_shared_face(face_pair):
    halos = compute_halos(face_pair, PartitionMap({1: 0, 2: 1}, 2))
    assert halos[0].ghosts == {2, 3, 4}
    assert halos[1].ghosts == {2, 3, 4}
    assert halos[0].required == {1, 2, 3, 4}
    assert halos[1].owned == [2]


def test_halos_cover_the_mesh(cube5):
    pm = rcb(cube5, 8)
    halos = compute_halos(cube5, pm)
    owned = [e for p in range(8) for e in halos[p].owned]
    assert sorted(owned) == sorted(cube5.element_ids)
    assert set().union(*(halos[p].required for p in range(8))) == set(cube5.vertices)

    for p in range(8):
        others = set().union(*(halos[q].required for q in range(8) if q != p))
        assert halos[p].ghosts == halos[p].required & others


def test_graph_edges_are_unique(cube3):
    edges = graph_edges(element_adjacency_graph(cube3))
    assert len(edges) == len(set(edges))
    assert all(u < v for u, v in edges)


def test_refined_path_cut_is_the_balanced_optimum():
    g = path_graph(10)
    best = min(
        edge_cut(g, PartitionMap({e: 0 if e in first else 1 for e in g}, 2))
        for first in map(set, combinations(range(1, 11), 5))
    )
    refined = refine(g, PartitionMap({e: e % 2 for e in g}, 2))
    assert best == 1
    assert edge_cut(g, refined) == best
    assert refined.sizes() == [5, 5]
