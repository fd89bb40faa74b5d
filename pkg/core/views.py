"""
Element views
Quadruple and first-normal-form incidence representations of the element
table, the transforms between them, the dual-storage policy and adjacency queries
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from core.errors import (
    DegenerateElementError,
    DivergenceError,
    IncompleteElementError,
    MalformedRankError,
    UnknownVertexError,
)
from core.mesh import Mesh, RepresentationMode, Tetrahedron

logger = logging.getLogger(__name__)

# Undirected element graph: ElemID -> face neighbours
ElementGraph = Dict[int, Set[int]]

DEFAULT_DUAL_THRESHOLD = 100_000


@dataclass(frozen=True, order=True)
class IncidenceRow:
    """(ElemID, Rank, VertexID) row of the normalized table"""
    elem_id: int
    rank: int
    vertex_id: int


@dataclass
class RepresentationPolicy:
    """Configured mode plus the element count above which both tables are kept"""
    mode: RepresentationMode = RepresentationMode.QUADRUPLE
    threshold: int = DEFAULT_DUAL_THRESHOLD

    def resolve(self, element_count: int) -> RepresentationMode:
        if element_count > self.threshold:
            return RepresentationMode.DUAL
        return self.mode

    @classmethod
    def from_setting(cls, setting: str, threshold: int = DEFAULT_DUAL_THRESHOLD) -> "RepresentationPolicy":
        """Build from a config value: auto, quadruple, normalized or dual"""
        if setting == "auto":
            return cls(RepresentationMode.QUADRUPLE, threshold)
        return cls(RepresentationMode(setting), threshold)


@dataclass
class SyncReport:
    mode: RepresentationMode
    synced: bool
    diverged: List[int] = field(default_factory=list)

    def lines(self) -> List[str]:
        lines = [f"mode={self.mode.value} synced={str(self.synced).lower()} diverged={len(self.diverged)}"]
        lines.extend(f"divergence elem_id={elem_id}" for elem_id in self.diverged)
        return lines


def to_normalized(elements: Iterable[Tetrahedron]) -> List[IncidenceRow]:
    """Four rows per element, rank r carrying corner v_r"""
    rows: List[IncidenceRow] = []
    for t in elements:
        for rank, vertex_id in enumerate(t.corners):
            rows.append(IncidenceRow(t.id, rank, vertex_id))
    rows.sort()
    return rows


def to_quadruple(rows: Iterable[IncidenceRow]) -> List[Tetrahedron]:
    """Rebuild quadruples from incidence rows, the inverse of to_normalized"""
    by_element: Dict[int, Dict[int, int]] = defaultdict(dict)
    for row in rows:
        if not 0 <= row.rank < 4:
            raise MalformedRankError(
                f"element {row.elem_id} has rank {row.rank} outside 0..3", elem_id=row.elem_id)
        ranks = by_element[row.elem_id]
        if row.rank in ranks:
            raise MalformedRankError(
                f"element {row.elem_id} has rank {row.rank} twice", elem_id=row.elem_id)
        ranks[row.rank] = row.vertex_id

    elements: List[Tetrahedron] = []
    for elem_id in sorted(by_element):
        ranks = by_element[elem_id]
        if len(ranks) != 4:
            missing = sorted(set(range(4)) - set(ranks))
            raise IncompleteElementError(
                f"element {elem_id} is missing rank(s) {missing}", elem_id=elem_id)
        corners = tuple(ranks[r] for r in range(4))
        if len(set(corners)) != 4:
            raise DegenerateElementError(
                f"element {elem_id} lists a vertex under two ranks", elem_id=elem_id)
        elements.append(Tetrahedron(elem_id, corners))
    return elements


def elements_sharing_vertex_scan(vertex: int, m: Mesh) -> Set[int]:
    """Full scan of the quadruple view: @VertexID in (v0, v1, v2, v3)"""
    if vertex not in m.vertices:
        raise UnknownVertexError(f"vertex {vertex} does not exist", vertex_id=vertex)
    return {t.id for t in m.iter_elements() if vertex in t.corners}


def elements_sharing_vertex(vertex: int, m: Mesh, via: Optional[RepresentationMode] = None) -> Set[int]:
    """Elements having `vertex` as a corner.

    Uses the normalized table's VertexID access path when it is materialized,
    otherwise scans the quadruple table. `via` forces one path.
    """
    if vertex not in m.vertices:
        raise UnknownVertexError(f"vertex {vertex} does not exist", vertex_id=vertex)
    use_normalized = m.vertex_elements is not None if via is None else via != RepresentationMode.QUADRUPLE
    if use_normalized and m.vertex_elements is not None:
        return set(m.vertex_elements.get(vertex, ()))
    return elements_sharing_vertex_scan(vertex, m)


def element_adjacency_graph(m: Mesh) -> ElementGraph:
    """Face-sharing graph: two elements are adjacent iff they share 3 vertices"""
    graph: ElementGraph = {t.id: set() for t in m.iter_elements()}
    faces: Dict[Tuple[int, int, int], List[int]] = defaultdict(list)
    for t in m.iter_elements():
        a, b, c, d = sorted(t.corners)
        for face in ((a, b, c), (a, b, d), (a, c, d), (b, c, d)):
            faces[face].append(t.id)

    for owners in faces.values():
        for i in range(len(owners)):
            for j in range(i + 1, len(owners)):
                if owners[i] != owners[j]:
                    graph[owners[i]].add(owners[j])
                    graph[owners[j]].add(owners[i])
    return graph


def graph_edges(graph: ElementGraph) -> List[Tuple[int, int]]:
    """Each undirected edge once, as (smaller, larger)"""
    return sorted((u, v) for u, neighbours in graph.items() for v in neighbours if u < v)


def sync_representations(m: Mesh, strict: bool = False) -> SyncReport:
    """Make the normalized table equal to_normalized(quadruple table).

    Only meaningful in dual mode; other modes are a no-op. Elements whose rows
    disagreed before the rebuild are listed in the report, or raised when strict.
    """
    if m.mode != RepresentationMode.DUAL:
        return SyncReport(m.mode, synced=False)

    expected: Dict[Tuple[int, int], int] = {}
    for elem_id, corners in m.quadruples.items():
        for rank, vertex_id in enumerate(corners):
            expected[(elem_id, rank)] = vertex_id

    diverged = sorted({key[0] for key in set(expected) | set(m.incidence)
                       if expected.get(key) != m.incidence.get(key)})
    if diverged:
        logger.warning(f"Normalized table diverged from the quadruple table for {len(diverged)} element(s)")
        if strict:
            raise DivergenceError(
                f"representations disagree for elements {diverged[:10]}", elem_id=diverged[0])

    m.incidence = expected
    m.vertex_elements = {}
    for (elem_id, _), vertex_id in expected.items():
        m.vertex_elements.setdefault(vertex_id, set()).add(elem_id)
    return SyncReport(m.mode, synced=True, diverged=diverged)


def apply_policy(m: Mesh, policy: RepresentationPolicy) -> RepresentationMode:
    """Pick the effective mode for the mesh's current size and materialize it"""
    mode = policy.resolve(m.element_count)
    if mode != m.mode:
        logger.info(f"Representation policy selects {mode.value} for {m.element_count} elements")
        m.set_mode(mode)
    return mode
