"""
Cube Mesh Generator
Deterministic unit-cube tetrahedral meshes and a two-region attribute layout used as fixtures
"""

import logging
from itertools import permutations
from typing import Tuple

from core.attributes import AttributeBinding, AttributeStore, TopoEntity, TopoKind
from core.errors import InvalidQueryError
from core.mesh import Mesh, RepresentationMode, Vertex

logger = logging.getLogger(__name__)

# Corner paths from (0,0,0) to (1,1,1) through one axis at a time, in fixed order
_PATHS = list(permutations(range(3)))


def _is_odd(perm: Tuple[int, ...]) -> bool:
    inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
    return inversions % 2 == 1


def vertex_id(n: int, i: int, j: int, k: int) -> int:
    return 1 + i + (n + 1) * (j + (n + 1) * k)


def generate_cube_mesh(n: int, mode: RepresentationMode = RepresentationMode.QUADRUPLE) -> Mesh:
    """Unit cube with n cells per axis, each cell split into 6 tetrahedra
    around its (0,0,0)-(1,1,1) diagonal.

    Every tetrahedron has positive signed volume. Vertex (i, j, k) gets id
    1 + i + (n+1)(j + (n+1)k); the p-th tetrahedron of cell c gets 1 + 6c + p.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidQueryError(f"cube subdivisions must be a positive integer, got {n!r}")

    m = Mesh(mode)
    for k in range(n + 1):
        for j in range(n + 1):
            for i in range(n + 1):
                m.add_vertex(Vertex(vertex_id(n, i, j, k), i / n, j / n, k / n))

    for k in range(n):
        for j in range(n):
            for i in range(n):
                cell = i + n * (j + n * k)
                for p, path in enumerate(_PATHS):
                    corner = [i, j, k]
                    corners = [vertex_id(n, *corner)]
                    for axis in path:
                        corner[axis] += 1
                        corners.append(vertex_id(n, *corner))
                    if _is_odd(path):
                        corners[1], corners[2] = corners[2], corners[1]
                    m.add_tetrahedron(1 + 6 * cell + p, corners)

    logger.debug(f"Generated cube mesh n={n}: {m.vertex_count} vertices, {m.element_count} elements")
    return m


def build_two_region_store(m: Mesh, split: float = 0.5, name: str = "conductivity",
                           values: Tuple[float, float] = (5.0, 7.0)) -> AttributeStore:
    """Regions 1 (centroid x < split) and 2 (the rest) sharing interface face 1,
    each carrying its own value of `name`"""
    store = AttributeStore()
    store.topology.add(TopoKind.FACE, 1)
    store.topology.add(TopoKind.REGION, 1, boundary=[1])
    store.topology.add(TopoKind.REGION, 2, boundary=[1])

    for t in m.iter_elements():
        region = 1 if m.centroid(t.id)[0] < split else 2
        store.classification.classify_element(t.id, region)

    for region, value in zip((1, 2), values):
        store.assign(TopoEntity(TopoKind.REGION, region), AttributeBinding(name, value))
    return store
