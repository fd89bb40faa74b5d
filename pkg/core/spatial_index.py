"""
Spatial index
Cell (bounding box) table, a composite interval index seeked on x_min,
space-filling-curve surrogate keys and barycentric point location
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

import numpy as np

from core.errors import (
    DegenerateElementError,
    InvalidQueryError,
    NonFiniteCoordinateError,
    OutOfFrameError,
    StaleIndexError,
)
from core.mesh import Cell, Mesh, Tetrahedron, bounding_box, is_geometrically_degenerate

logger = logging.getLogger(__name__)

DEFAULT_BITS = 10
INSIDE_TOLERANCE = 1e-12

GridIndices = Tuple[int, int, int]


@dataclass(frozen=True)
class QueryPoint:
    """The @x, @y, @z of a point query"""
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise NonFiniteCoordinateError(f"query point ({self.x}, {self.y}, {self.z}) is not finite")

    @classmethod
    def parse(cls, text: str) -> "QueryPoint":
        """Parse "x,y,z" """
        parts = [p.strip() for p in text.split(",")]
        try:
            if len(parts) != 3:
                raise ValueError(f"expected 3 values, got {len(parts)}")
            x, y, z = (float(v) for v in parts)
        except ValueError as e:
            raise InvalidQueryError(f"bad point {text!r}, expected x,y,z ({e})")
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class BarycentricCoords:
    l0: float
    l1: float
    l2: float
    l3: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.l0, self.l1, self.l2, self.l3)

    def inside(self, tolerance: float = INSIDE_TOLERANCE) -> bool:
        """Inside or on the boundary when every coordinate is >= -tolerance"""
        return min(self.as_tuple()) >= -tolerance


def build_cell_table(m: Mesh) -> Dict[int, Cell]:
    """One bounding box per element; stored on the mesh as its cell table"""
    cells: Dict[int, Cell] = {}
    for t in m.iter_elements():
        cells[t.id] = bounding_box(t, m)
    m.cells = cells
    logger.info(f"Built cell table with {len(cells)} cells")
    return cells


def point_in_box_scan(p: QueryPoint, cells: Mapping[int, Cell]) -> Set[int]:
    """Full table scan of the cell table"""
    return {cell_id for cell_id, cell in cells.items() if cell.contains(p.x, p.y, p.z)}


class IntervalIndex:
    """Composite index on (x_min, x_max, y_min, y_max) of the cell table.

    Entries are kept in lexicographic key order in a sorted array; a seek
    binary-searches the leading x_min bound and the residual predicates are
    filtered on the key before the z bounds are read from the cell row.
    """

    def __init__(self):
        self.entries: List[Tuple[float, float, float, float, int]] = []
        self._x_min: List[float] = []

    @classmethod
    def build(cls, cells: Mapping[int, Cell]) -> "IntervalIndex":
        index = cls()
        index.entries = sorted((c.x_min, c.x_max, c.y_min, c.y_max, cell_id) for cell_id, c in cells.items())
        index._x_min = [entry[0] for entry in index.entries]
        return index

    def __len__(self) -> int:
        return len(self.entries)

    def insert(self, cell: Cell):
        entry = (cell.x_min, cell.x_max, cell.y_min, cell.y_max, cell.id)
        position = bisect.bisect_left(self.entries, entry)
        self.entries.insert(position, entry)
        self._x_min.insert(position, cell.x_min)

    def remove(self, cell: Cell):
        entry = (cell.x_min, cell.x_max, cell.y_min, cell.y_max, cell.id)
        position = bisect.bisect_left(self.entries, entry)
        if position < len(self.entries) and self.entries[position] == entry:
            del self.entries[position]
            del self._x_min[position]

    def seek(self, p: QueryPoint) -> Iterable[int]:
        """Cell ids whose (x, y) key range admits p; z is checked by the caller"""
        end = bisect.bisect_right(self._x_min, p.x)
        for position in range(end):
            _, x_max, y_min, y_max, cell_id = self.entries[position]
            if p.x <= x_max and y_min <= p.y <= y_max:
                yield cell_id


def point_in_box_indexed(p: QueryPoint, idx: IntervalIndex, cells: Mapping[int, Cell]) -> Set[int]:
    """Index seek plus lookup of the remaining bounds in the cell table"""
    if len(idx) != len(cells):
        raise StaleIndexError(f"index has {len(idx)} entries but the cell table has {len(cells)} cells")
    result: Set[int] = set()
    for cell_id in idx.seek(p):
        cell = cells.get(cell_id)
        if cell is None:
            raise StaleIndexError(f"index references cell {cell_id} missing from the cell table")
        if cell.z_min <= p.z <= cell.z_max:
            result.add(cell_id)
    return result


# ---------------------------------------------------------------- surrogate keys

def _spread(v: int) -> int:
    """Insert two zero bits between each of the low 21 bits"""
    v &= 0x1fffff
    v = (v | v << 32) & 0x1f00000000ffff
    v = (v | v << 16) & 0x1f0000ff0000ff
    v = (v | v << 8) & 0x100f00f00f00f00f
    v = (v | v << 4) & 0x10c30c30c30c30c3
    v = (v | v << 2) & 0x1249249249249249
    return v


def _compact(v: int) -> int:
    v &= 0x1249249249249249
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00f
    v = (v ^ (v >> 8)) & 0x1f0000ff0000ff
    v = (v ^ (v >> 16)) & 0x1f00000000ffff
    v = (v ^ (v >> 32)) & 0x1fffff
    return v


def interleave(i: int, j: int, k: int) -> int:
    """x bit b goes to position 3b, y to 3b+1, z to 3b+2"""
    return _spread(i) | (_spread(j) << 1) | (_spread(k) << 2)


def deinterleave(code: int) -> GridIndices:
    return (_compact(code), _compact(code >> 1), _compact(code >> 2))


@dataclass(frozen=True)
class MortonGrid:
    """Quantization frame: origin, per-axis cell size and bits per axis"""
    origin: Tuple[float, float, float]
    cell_size: Tuple[float, float, float]
    bits: int = DEFAULT_BITS

    @property
    def resolution(self) -> int:
        return 1 << self.bits

    @classmethod
    def from_bounds(cls, lo: Iterable[float], hi: Iterable[float], bits: int = DEFAULT_BITS) -> "MortonGrid":
        """Frame over a bounding box widened by one part in 2**bits on each side"""
        if not 1 <= bits <= 21:
            raise ValueError(f"bits per axis must be between 1 and 21, got {bits}")
        resolution = 1 << bits
        origin = []
        cell_size = []
        for a, b in zip(lo, hi):
            span = float(b) - float(a)
            if span <= 0.0:
                span = 1.0
            margin = span / resolution
            origin.append(float(a) - margin)
            cell_size.append((span + 2.0 * margin) / resolution)
        return cls(tuple(origin), tuple(cell_size), bits)

    @classmethod
    def for_mesh(cls, m: Mesh, bits: int = DEFAULT_BITS) -> "MortonGrid":
        lo, hi = m.global_bounds()
        return cls.from_bounds(lo, hi, bits)

    def quantize(self, p: QueryPoint) -> GridIndices:
        indices = []
        for value, start, size in zip((p.x, p.y, p.z), self.origin, self.cell_size):
            position = (value - start) / size
            if position < 0.0 or position >= self.resolution:
                raise OutOfFrameError(f"point ({p.x}, {p.y}, {p.z}) lies outside the grid frame")
            indices.append(min(int(position), self.resolution - 1))
        return tuple(indices)

    def octant(self, p: QueryPoint, level: int) -> GridIndices:
        """Indices of the level-k octant holding p"""
        shift = self.bits - level
        i, j, k = self.quantize(p)
        return (i >> shift, j >> shift, k >> shift)


@dataclass(frozen=True)
class MortonKey:
    code: int
    bits: int = DEFAULT_BITS

    def prefix(self, level: int) -> int:
        """Top 3*level bits; equal for points in the same level-k octant"""
        return self.code >> (3 * (self.bits - level))


def morton_encode_indices(indices: GridIndices, bits: int = DEFAULT_BITS) -> MortonKey:
    limit = 1 << bits
    if any(i < 0 or i >= limit for i in indices):
        raise OutOfFrameError(f"grid indices {indices} outside 0..{limit - 1}")
    return MortonKey(interleave(*indices), bits)


def morton_encode(p: QueryPoint, grid: MortonGrid) -> MortonKey:
    return morton_encode_indices(grid.quantize(p), grid.bits)


def morton_decode(key: MortonKey) -> GridIndices:
    return deinterleave(key.code)


def hilbert_encode_indices(indices: GridIndices, bits: int = DEFAULT_BITS) -> int:
    """Hilbert index of grid cell indices (transpose form, 3 axes)"""
    limit = 1 << bits
    if any(i < 0 or i >= limit for i in indices):
        raise OutOfFrameError(f"grid indices {indices} outside 0..{limit - 1}")
    x = list(indices)
    n = len(x)
    top = 1 << (bits - 1)

    # Inverse undo
    q = top
    while q > 1:
        p = q - 1
        for i in range(n):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q >>= 1

    # Gray encode
    for i in range(1, n):
        x[i] ^= x[i - 1]
    t = 0
    q = top
    while q > 1:
        if x[n - 1] & q:
            t ^= q - 1
        q >>= 1
    for i in range(n):
        x[i] ^= t

    code = 0
    for b in range(bits - 1, -1, -1):
        for i in range(n):
            code = (code << 1) | ((x[i] >> b) & 1)
    return code


def hilbert_decode_indices(code: int, bits: int = DEFAULT_BITS) -> GridIndices:
    n = 3
    x = [0, 0, 0]
    position = 3 * bits - 1
    for b in range(bits - 1, -1, -1):
        for i in range(n):
            x[i] |= ((code >> position) & 1) << b
            position -= 1

    # Gray decode
    t = x[n - 1] >> 1
    for i in range(n - 1, 0, -1):
        x[i] ^= x[i - 1]
    x[0] ^= t

    # Undo excess work
    limit = 2 << (bits - 1)
    q = 2
    while q != limit:
        p = q - 1
        for i in range(n - 1, -1, -1):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q <<= 1
    return tuple(x)


def morton_order(cells: Mapping[int, Cell], grid: MortonGrid) -> List[int]:
    """Cell ids ordered by the Morton key of their box centre (ties by id)"""
    keyed = []
    for cell_id, cell in cells.items():
        code = morton_encode(QueryPoint(*cell.center), grid).code
        keyed.append((code, cell_id))
    keyed.sort()
    return [cell_id for _, cell_id in keyed]


# ---------------------------------------------------------------- point location

def barycentric(p: QueryPoint, t: Tetrahedron, m: Mesh) -> BarycentricCoords:
    """Express p as an affine combination of the element's corners"""
    points = np.array([m.get_vertex(c).coords for c in t.corners], dtype=np.float64)
    if is_geometrically_degenerate(points):
        raise DegenerateElementError(f"element {t.id} has (nearly) zero volume", elem_id=t.id)

    system = np.vstack([points.T, np.ones(4)])
    rhs = np.array([p.x, p.y, p.z, 1.0])
    weights = np.linalg.solve(system, rhs)
    return BarycentricCoords(*(float(w) for w in weights))


class SpatialIndex:
    """Cell table, interval index and surrogate-key grid of one mesh"""

    def __init__(self, mesh: Mesh, bits: int = DEFAULT_BITS, cells: Optional[Dict[int, Cell]] = None):
        self.logger = logging.getLogger(__name__)
        self.mesh = mesh
        if cells is not None:
            mesh.cells = dict(cells)
        elif mesh.cells is None:
            build_cell_table(mesh)
        self.cells = mesh.cells
        self.index = IntervalIndex.build(self.cells)
        self.grid = MortonGrid.for_mesh(mesh, bits)
        self.logger.debug(f"Index built over {len(self.index)} cells")

    def locate(self, p: QueryPoint, tolerance: float = INSIDE_TOLERANCE) -> Set[int]:
        return point_locate(p, self.mesh, self.index, tolerance=tolerance)


def point_locate(p: QueryPoint, m: Mesh, idx: IntervalIndex,
                 cells: Optional[Mapping[int, Cell]] = None,
                 tolerance: float = INSIDE_TOLERANCE) -> Set[int]:
    """Coarse box filter through the index, then an exact barycentric test"""
    if cells is None:
        cells = m.cells if m.cells is not None else {}
    candidates = point_in_box_indexed(p, idx, cells)
    found: Set[int] = set()
    for elem_id in candidates:
        try:
            coords = barycentric(p, m.get_element(elem_id), m)
        except DegenerateElementError:
            # slivers enclose no volume
            continue
        if coords.inside(tolerance):
            found.add(elem_id)
    return found
