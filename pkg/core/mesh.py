"""
Mesh tables
Vertex and tetrahedron tables with their integrity constraints, plus the
geometric primitives built on them (signed volume, canonical keys, bounding boxes)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from core.errors import (
    DanglingVertexError,
    DegenerateElementError,
    DuplicateElementError,
    DuplicateIdError,
    FlatBoxError,
    InvalidIdError,
    NonFiniteCoordinateError,
    UnknownElementError,
    UnknownVertexError,
    VertexInUseError,
)

logger = logging.getLogger(__name__)

Corners = Tuple[int, int, int, int]

# Relative tolerance for coplanarity: |volume| <= tol * diagonal**3
GEOMETRIC_TOLERANCE = 1e-12


class RepresentationMode(Enum):
    """Which element tables a mesh keeps materialized"""
    QUADRUPLE = "quadruple"
    NORMALIZED = "normalized"
    DUAL = "dual"


@dataclass(frozen=True)
class Vertex:
    """A point of the vertex table"""
    id: int
    x: float
    y: float
    z: float

    @property
    def coords(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


@dataclass(frozen=True)
class Tetrahedron:
    """An element as a quadruple of vertex ids; corner order gives orientation"""
    id: int
    corners: Corners


@dataclass(frozen=True)
class CanonicalKey:
    """Sorted corner set plus the parity of the stored order relative to it"""
    sorted: Corners
    parity: int


@dataclass(frozen=True)
class Cell:
    """Axis-aligned bounding box of an element"""
    id: int
    x_min: float
    y_min: float
    z_min: float
    x_max: float
    y_max: float
    z_max: float

    def contains(self, x: float, y: float, z: float) -> bool:
        # Inclusive on every bound, like BETWEEN
        return (self.x_min <= x <= self.x_max
                and self.y_min <= y <= self.y_max
                and self.z_min <= z <= self.z_max)

    def is_valid(self) -> bool:
        return self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max

    @property
    def center(self) -> Tuple[float, float, float]:
        return ((self.x_min + self.x_max) / 2.0,
                (self.y_min + self.y_max) / 2.0,
                (self.z_min + self.z_max) / 2.0)


class ViolationKind(Enum):
    INVALID_ID = "invalid-id"
    DUPLICATE_ID = "duplicate-id"
    NON_FINITE_COORDINATE = "non-finite-coordinate"
    DANGLING_VERTEX = "dangling-vertex"
    DEGENERATE_ELEMENT = "degenerate-element"
    DUPLICATE_ELEMENT = "duplicate-element"
    GEOMETRIC_DEGENERACY = "geometric-degeneracy"


@dataclass
class Violation:
    """One integrity finding"""
    kind: ViolationKind
    elem_id: Optional[int] = None
    vertex_id: Optional[int] = None
    detail: str = ""
    row: Optional[int] = None

    def to_line(self) -> str:
        parts = [f"violation={self.kind.value}"]
        if self.row is not None:
            parts.append(f"row={self.row}")
        if self.elem_id is not None:
            parts.append(f"elem_id={self.elem_id}")
        if self.vertex_id is not None:
            parts.append(f"vertex_id={self.vertex_id}")
        if self.detail:
            parts.append(f"detail={self.detail}")
        return " ".join(parts)


@dataclass
class ViolationReport:
    """Result of an integrity check; warnings never make a mesh invalid"""
    violations: List[Violation] = field(default_factory=list)
    warnings: List[Violation] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def count(self, kind: ViolationKind) -> int:
        return sum(1 for v in self.violations if v.kind == kind)

    def lines(self) -> List[str]:
        lines = [v.to_line() for v in self.violations]
        lines.extend(v.to_line().replace("violation=", "warning=", 1) for v in self.warnings)
        return lines


def _check_id(value: int, what: str):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
        raise InvalidIdError(f"{what} id must be a positive integer, got {value!r}")


def canonicalize(corners: Sequence[int]) -> CanonicalKey:
    """Sort the corner ids and record the parity of the permutation that sorts them"""
    corners = tuple(int(c) for c in corners)
    if len(corners) != 4:
        raise DegenerateElementError(f"expected 4 corners, got {len(corners)}")
    if len(set(corners)) != 4:
        raise DegenerateElementError(f"repeated corner in {corners}")

    inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if corners[i] > corners[j])
    return CanonicalKey(sorted=tuple(sorted(corners)), parity=-1 if inversions % 2 else 1)


def _triple_volume(points: np.ndarray) -> float:
    a = points[1] - points[0]
    b = points[2] - points[0]
    c = points[3] - points[0]
    return float(np.dot(a, np.cross(b, c))) / 6.0


def _diagonal(points: np.ndarray) -> float:
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


class Mesh:
    """Vertex table, element table and the derived cell table of one mesh"""

    def __init__(self, mode: RepresentationMode = RepresentationMode.QUADRUPLE):
        self.logger = logging.getLogger(__name__)
        self.vertices: Dict[int, Vertex] = {}
        self.mode = mode

        # Quadruple table: ElemID -> (v0, v1, v2, v3)
        self.quadruples: Optional[Dict[int, Corners]] = {} if mode != RepresentationMode.NORMALIZED else None
        # Normalized table: (ElemID, Rank) -> VertexID, plus its VertexID access path
        self.incidence: Optional[Dict[Tuple[int, int], int]] = None
        self.vertex_elements: Optional[Dict[int, Set[int]]] = None
        if mode != RepresentationMode.QUADRUPLE:
            self.incidence = {}
            self.vertex_elements = {}

        self.element_ids: Dict[int, None] = {}
        # Canonical sorted key -> ElemID, and per-element orientation parity
        self.keys: Dict[Corners, int] = {}
        self.parity: Dict[int, int] = {}
        self.cells: Optional[Dict[int, Cell]] = None

    # ------------------------------------------------------------------ tables

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def element_count(self) -> int:
        return len(self.element_ids)

    def has_element(self, elem_id: int) -> bool:
        return elem_id in self.element_ids

    def corners_of(self, elem_id: int) -> Corners:
        if elem_id not in self.element_ids:
            raise UnknownElementError(f"element {elem_id} does not exist", elem_id=elem_id)
        if self.quadruples is not None:
            return self.quadruples[elem_id]
        return tuple(self.incidence[(elem_id, rank)] for rank in range(4))

    def get_element(self, elem_id: int) -> Tetrahedron:
        return Tetrahedron(elem_id, self.corners_of(elem_id))

    def iter_elements(self) -> Iterator[Tetrahedron]:
        """Elements in insertion order"""
        for elem_id in self.element_ids:
            yield Tetrahedron(elem_id, self.corners_of(elem_id))

    def get_vertex(self, vertex_id: int) -> Vertex:
        try:
            return self.vertices[vertex_id]
        except KeyError:
            raise UnknownVertexError(f"vertex {vertex_id} does not exist", vertex_id=vertex_id)

    # --------------------------------------------------------------- mutation

    def add_vertex(self, vertex: Vertex, check: bool = True):
        """Insert a vertex; with check=False only the key constraint is enforced"""
        _check_id(vertex.id, "vertex")
        if vertex.id in self.vertices:
            raise DuplicateIdError(f"vertex {vertex.id} already exists", vertex_id=vertex.id)
        if check and not vertex.is_finite():
            raise NonFiniteCoordinateError(
                f"vertex {vertex.id} has non-finite coordinates {vertex.coords}", vertex_id=vertex.id)
        self.vertices[vertex.id] = Vertex(int(vertex.id), float(vertex.x), float(vertex.y), float(vertex.z))

    def remove_vertex(self, vertex_id: int):
        if vertex_id not in self.vertices:
            raise UnknownVertexError(f"vertex {vertex_id} does not exist", vertex_id=vertex_id)
        users = self._scan_vertex(vertex_id)
        if users:
            raise VertexInUseError(
                f"vertex {vertex_id} is referenced by {len(users)} element(s)", vertex_id=vertex_id)
        del self.vertices[vertex_id]

    def add_tetrahedron(self, elem_id: int, corners: Sequence[int], check: bool = True):
        """Insert an element.

        With check=True every table constraint is enforced (distinct corners,
        foreign keys, canonical-key uniqueness). With check=False only the
        primary key is enforced; the bulk loader uses this and validates afterwards.
        """
        _check_id(elem_id, "element")
        elem_id = int(elem_id)
        corners = tuple(int(c) for c in corners)
        if len(corners) != 4:
            raise DegenerateElementError(
                f"element {elem_id} needs 4 corners, got {len(corners)}", elem_id=elem_id)
        if elem_id in self.element_ids:
            raise DuplicateIdError(f"element {elem_id} already exists", elem_id=elem_id)

        key: Optional[CanonicalKey] = None
        if check:
            key = canonicalize_element(elem_id, corners)
            missing = [c for c in corners if c not in self.vertices]
            if missing:
                raise DanglingVertexError(
                    f"element {elem_id} references missing vertices {missing}",
                    elem_id=elem_id, vertex_id=missing[0])
            if key.sorted in self.keys:
                raise DuplicateElementError(
                    f"element {elem_id} duplicates element {self.keys[key.sorted]}",
                    elem_id=elem_id, existing=self.keys[key.sorted])
        elif len(set(corners)) == 4:
            key = canonicalize(corners)

        self.element_ids[elem_id] = None
        if self.quadruples is not None:
            self.quadruples[elem_id] = corners
        if self.incidence is not None:
            for rank, vertex_id in enumerate(corners):
                self.incidence[(elem_id, rank)] = vertex_id
                self.vertex_elements.setdefault(vertex_id, set()).add(elem_id)
        if key is not None:
            self.keys.setdefault(key.sorted, elem_id)
            self.parity[elem_id] = key.parity

    def remove_element(self, elem_id: int):
        corners = self.corners_of(elem_id)
        del self.element_ids[elem_id]
        if self.quadruples is not None:
            del self.quadruples[elem_id]
        if self.incidence is not None:
            for rank, vertex_id in enumerate(corners):
                self.incidence.pop((elem_id, rank), None)
                users = self.vertex_elements.get(vertex_id)
                if users is not None:
                    users.discard(elem_id)
                    if not users:
                        del self.vertex_elements[vertex_id]
        self.parity.pop(elem_id, None)
        if len(set(corners)) == 4:
            sorted_key = tuple(sorted(corners))
            if self.keys.get(sorted_key) == elem_id:
                del self.keys[sorted_key]
        if self.cells is not None:
            self.cells.pop(elem_id, None)

    def set_mode(self, mode: RepresentationMode):
        """Materialize or drop element tables so that `mode` holds"""
        if mode == self.mode:
            return
        elements = [(t.id, t.corners) for t in self.iter_elements()]
        if mode == RepresentationMode.NORMALIZED:
            self.quadruples = None
        elif self.quadruples is None:
            self.quadruples = {elem_id: corners for elem_id, corners in elements}

        if mode == RepresentationMode.QUADRUPLE:
            self.incidence = None
            self.vertex_elements = None
        elif self.incidence is None:
            self.incidence = {}
            self.vertex_elements = {}
            for elem_id, corners in elements:
                for rank, vertex_id in enumerate(corners):
                    self.incidence[(elem_id, rank)] = vertex_id
                    self.vertex_elements.setdefault(vertex_id, set()).add(elem_id)
        self.logger.debug(f"Representation changed from {self.mode.value} to {mode.value}")
        self.mode = mode

    # --------------------------------------------------------------- geometry

    def corner_points(self, elem_id: int) -> np.ndarray:
        """4x3 array of corner coordinates"""
        corners = self.corners_of(elem_id)
        missing = [c for c in corners if c not in self.vertices]
        if missing:
            raise DanglingVertexError(
                f"element {elem_id} references missing vertices {missing}",
                elem_id=elem_id, vertex_id=missing[0])
        return np.array([self.vertices[c].coords for c in corners], dtype=np.float64)

    def centroid(self, elem_id: int) -> np.ndarray:
        return self.corner_points(elem_id).mean(axis=0)

    def global_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-axis minimum and maximum over all vertices"""
        if not self.vertices:
            return np.zeros(3), np.zeros(3)
        points = np.array([v.coords for v in self.vertices.values()], dtype=np.float64)
        return points.min(axis=0), points.max(axis=0)

    def _scan_vertex(self, vertex_id: int) -> Set[int]:
        return {t.id for t in self.iter_elements() if vertex_id in t.corners}

    def __repr__(self) -> str:
        return f"Mesh(vertices={self.vertex_count}, elements={self.element_count}, mode={self.mode.value})"


def canonicalize_element(elem_id: int, corners: Sequence[int]) -> CanonicalKey:
    try:
        return canonicalize(corners)
    except DegenerateElementError as e:
        raise DegenerateElementError(f"element {elem_id}: {e.message}", elem_id=elem_id)


def signed_volume(t: Tetrahedron, m: Mesh) -> float:
    """One sixth of the triple product of the edges leaving corner v0"""
    missing = [c for c in t.corners if c not in m.vertices]
    if missing:
        raise DanglingVertexError(
            f"element {t.id} references missing vertices {missing}", elem_id=t.id, vertex_id=missing[0])
    points = np.array([m.vertices[c].coords for c in t.corners], dtype=np.float64)
    return _triple_volume(points)


def bounding_box(t: Tetrahedron, m: Mesh) -> Cell:
    missing = [c for c in t.corners if c not in m.vertices]
    if missing:
        raise DanglingVertexError(
            f"element {t.id} references missing vertices {missing}", elem_id=t.id, vertex_id=missing[0])
    points = np.array([m.vertices[c].coords for c in t.corners], dtype=np.float64)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    flat = [axis for axis, (a, b) in zip("xyz", zip(lo, hi)) if not a < b]
    if flat:
        raise FlatBoxError(f"element {t.id} has a flat bounding box on axis {','.join(flat)}", elem_id=t.id)
    return Cell(t.id, float(lo[0]), float(lo[1]), float(lo[2]), float(hi[0]), float(hi[1]), float(hi[2]))


def is_geometrically_degenerate(points: np.ndarray, tolerance: float = GEOMETRIC_TOLERANCE) -> bool:
    diagonal = _diagonal(points)
    return abs(_triple_volume(points)) <= tolerance * diagonal ** 3


def validate_mesh(m: Mesh, tolerance: float = GEOMETRIC_TOLERANCE) -> ViolationReport:
    """Check every table constraint from scratch.

    Reports non-finite vertices, dangling references, repeated corners and
    duplicate canonical keys (the later element of each duplicate pair).
    Coplanar elements are reported as warnings.
    """
    report = ViolationReport()

    for vertex in m.vertices.values():
        if not vertex.is_finite():
            report.violations.append(Violation(
                ViolationKind.NON_FINITE_COORDINATE, vertex_id=vertex.id,
                detail=f"({vertex.x!r};{vertex.y!r};{vertex.z!r})"))

    seen: Dict[Corners, int] = {}
    for t in m.iter_elements():
        missing = sorted({c for c in t.corners if c not in m.vertices})
        if missing:
            report.violations.append(Violation(
                ViolationKind.DANGLING_VERTEX, elem_id=t.id, vertex_id=missing[0],
                detail="missing=" + ";".join(str(c) for c in missing)))

        if len(set(t.corners)) != 4:
            report.violations.append(Violation(
                ViolationKind.DEGENERATE_ELEMENT, elem_id=t.id,
                detail="corners=" + ";".join(str(c) for c in t.corners)))
            continue

        key = tuple(sorted(t.corners))
        if key in seen:
            report.violations.append(Violation(
                ViolationKind.DUPLICATE_ELEMENT, elem_id=t.id, detail=f"duplicates={seen[key]}"))
        else:
            seen[key] = t.id

        if not missing:
            points = np.array([m.vertices[c].coords for c in t.corners], dtype=np.float64)
            if np.all(np.isfinite(points)) and is_geometrically_degenerate(points, tolerance):
                report.warnings.append(Violation(
                    ViolationKind.GEOMETRIC_DEGENERACY, elem_id=t.id, detail="coplanar corners"))

    if report.violations:
        logger.info(f"Mesh validation found {len(report.violations)} violation(s)")
    if report.warnings:
        logger.warning(f"{len(report.warnings)} element(s) have coplanar corners")
    return report
