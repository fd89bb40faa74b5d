"""
Tabular files
Plain-text table format used for every load and dump, plus the bulk loader
with deferred or immediate constraint checking
"""

import logging
import os
import re
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple
from urllib.parse import quote, unquote

from tqdm import tqdm

from core.errors import (
    ConstraintViolationError,
    DestinationUnwritableError,
    MeshDBError,
    ParseError,
    SchemaMismatchError,
)
from core.mesh import Mesh, Vertex, Violation, ViolationKind, validate_mesh
from core.views import IncidenceRow, to_normalized

logger = logging.getLogger(__name__)

# Text cells may hold any character except these, which are percent-encoded
_TEXT_SAFE = " !#$&'()*+-./:;<=>?@[]^_`{|}~"
_INT_CELL = re.compile(r"-?[0-9]+")
_FLOAT_CELL = re.compile(r"[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?|[+-]?(inf|nan)")


class ColumnType(Enum):
    INT = "int"
    FLOAT = "float"
    TEXT = "text"


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType

    def header(self) -> str:
        return f"{self.name}:{self.type.value}"


Schema = Tuple[Column, ...]


def schema(*headers: str) -> Schema:
    """Build a schema from "name:type" strings"""
    columns = []
    for item in headers:
        name, _, kind = item.partition(":")
        columns.append(Column(name, ColumnType(kind)))
    return tuple(columns)


VERTEX_SCHEMA = schema("vertex_id:int", "x:float", "y:float", "z:float")
ELEMENT_SCHEMA = schema("elem_id:int", "v0:int", "v1:int", "v2:int", "v3:int")
INCIDENCE_SCHEMA = schema("elem_id:int", "rank:int", "vertex_id:int")
CELL_SCHEMA = schema("cell_id:int", "x_min:float", "y_min:float", "z_min:float",
                     "x_max:float", "y_max:float", "z_max:float")
PARTITION_SCHEMA = schema("elem_id:int", "partition:int")


def result_schema(state_count: int) -> Schema:
    """Solver result rows: element, sample index and S state values"""
    return schema("elem_id:int", "sample:int", *(f"s{i}:float" for i in range(state_count)))


class TableKind(Enum):
    VERTICES = "vertices"
    ELEMENTS = "elements"
    INCIDENCE = "incidence"
    CELLS = "cells"


TABLE_SCHEMAS: Dict[TableKind, Schema] = {
    TableKind.VERTICES: VERTEX_SCHEMA,
    TableKind.ELEMENTS: ELEMENT_SCHEMA,
    TableKind.INCIDENCE: INCIDENCE_SCHEMA,
    TableKind.CELLS: CELL_SCHEMA,
}


class CheckMode(Enum):
    DEFERRED = "deferred"
    IMMEDIATE = "immediate"


@dataclass
class TabularFile:
    columns: Schema
    rows: List[Tuple[Any, ...]] = field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]


# ---------------------------------------------------------------- codec

def format_value(value: Any, kind: ColumnType) -> str:
    if kind == ColumnType.INT:
        return str(int(value))
    if kind == ColumnType.FLOAT:
        # repr is the shortest decimal that reads back to the same double
        return repr(float(value))
    return quote(str(value), safe=_TEXT_SAFE)


def parse_value(text: str, kind: ColumnType) -> Any:
    """Read one cell; only plain decimal spellings are accepted"""
    if kind == ColumnType.INT:
        if not _INT_CELL.fullmatch(text) or str(int(text)) != text:
            raise ValueError(f"non-canonical int cell {text!r}")
        return int(text)
    if kind == ColumnType.FLOAT:
        if not _FLOAT_CELL.fullmatch(text):
            raise ValueError(f"malformed float cell {text!r}")
        return float(text)
    return unquote(text)


def format_tabular(table: TabularFile) -> str:
    lines = [",".join(c.header() for c in table.columns)]
    for row in table.rows:
        if len(row) != len(table.columns):
            raise SchemaMismatchError(f"row {row!r} has {len(row)} values for {len(table.columns)} columns")
        lines.append(",".join(format_value(v, c.type) for v, c in zip(row, table.columns)))
    return "\n".join(lines) + "\n"


def parse_tabular(text: str, expected: Optional[Schema] = None) -> TabularFile:
    """Parse a table; line numbers in errors count the header as line 1"""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("missing header", line=1)

    columns = []
    for item in lines[0].split(","):
        name, sep, kind = item.partition(":")
        try:
            columns.append(Column(name, ColumnType(kind)))
        except ValueError:
            raise ParseError(f"bad column declaration {item!r}", line=1)
        if not sep or not name:
            raise ParseError(f"bad column declaration {item!r}", line=1)
    columns = tuple(columns)
    if expected is not None and columns != expected:
        raise SchemaMismatchError(
            f"header {','.join(c.header() for c in columns)} does not match "
            f"{','.join(c.header() for c in expected)}")

    table = TabularFile(columns)
    for number, line in enumerate(lines[1:], start=2):
        values = line.split(",")
        if len(values) != len(columns):
            raise ParseError(f"expected {len(columns)} values, found {len(values)}", line=number)
        try:
            table.rows.append(tuple(parse_value(v, c.type) for v, c in zip(values, columns)))
        except ValueError as e:
            raise ParseError(str(e), line=number)
    return table


def read_tabular(path: str, expected: Optional[Schema] = None) -> TabularFile:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise MeshDBError(f"cannot read {path}: {e}") from e
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid UTF-8 at byte {e.start}", line=raw.count(b"\n", 0, e.start) + 1) from e
    return parse_tabular(text, expected)


def write_tabular(path: str, table: TabularFile):
    text = format_tabular(table)
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise DestinationUnwritableError(f"cannot write {path}: {e}") from e


# ---------------------------------------------------------------- dumps

def table_of(m: Mesh, kind: TableKind) -> TabularFile:
    """Rows of one mesh table, ordered by key"""
    table = TabularFile(TABLE_SCHEMAS[kind])
    if kind == TableKind.VERTICES:
        table.rows = [(v.id, v.x, v.y, v.z) for _, v in sorted(m.vertices.items())]
    elif kind == TableKind.ELEMENTS:
        table.rows = [(e,) + m.corners_of(e) for e in sorted(m.element_ids)]
    elif kind == TableKind.INCIDENCE:
        table.rows = [(r.elem_id, r.rank, r.vertex_id) for r in to_normalized(m.iter_elements())]
    elif kind == TableKind.CELLS:
        cells = m.cells or {}
        table.rows = [(c.id, c.x_min, c.y_min, c.z_min, c.x_max, c.y_max, c.z_max)
                      for _, c in sorted(cells.items())]
    return table


def dump(m: Mesh, kind: TableKind, destination: str) -> TabularFile:
    table = table_of(m, kind)
    write_tabular(destination, table)
    logger.info(f"Dumped {len(table.rows)} {kind.value} rows to {destination}")
    return table


def incidence_rows(table: TabularFile) -> List[IncidenceRow]:
    return [IncidenceRow(*row) for row in table.rows]


# ---------------------------------------------------------------- bulk load

@dataclass
class LoadReport:
    table: TableKind
    check_mode: CheckMode
    rows_read: int = 0
    rows_loaded: int = 0
    violations: List[Violation] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def lines(self) -> List[str]:
        lines = [f"table={self.table.value} check={self.check_mode.value} rows_read={self.rows_read} "
                 f"rows_loaded={self.rows_loaded} violations={len(self.violations)}"]
        lines.extend(v.to_line() for v in self.violations)
        return lines


def _progress(rows: Sequence, label: str):
    return tqdm(rows, desc=label, unit="row", file=sys.stderr,
                disable=not sys.stderr.isatty() or len(rows) < 10000)


def _insert_row(m: Mesh, kind: TableKind, row: Tuple[Any, ...], check: bool):
    if kind == TableKind.VERTICES:
        m.add_vertex(Vertex(*row), check=check)
    else:
        m.add_tetrahedron(row[0], row[1:], check=check)


def _remove_row(m: Mesh, kind: TableKind, key: int):
    if kind == TableKind.VERTICES:
        del m.vertices[key]
    else:
        m.remove_element(key)


def bulk_load(table: TabularFile, target: Mesh, kind: TableKind,
              check_mode: CheckMode = CheckMode.DEFERRED) -> LoadReport:
    """Load vertex or element rows into a mesh.

    Deferred mode ingests every row with only key checks, then validates the
    whole mesh and reports each violation against the 1-based data row that
    caused it. Immediate mode checks each row as it is inserted; the first
    failure rolls back this load and raises ConstraintViolationError.
    """
    if kind not in (TableKind.VERTICES, TableKind.ELEMENTS):
        raise SchemaMismatchError(f"bulk load targets vertices or elements, not {kind.value}")
    if table.columns != TABLE_SCHEMAS[kind]:
        raise SchemaMismatchError(
            f"columns {','.join(c.header() for c in table.columns)} do not match the {kind.value} table")

    report = LoadReport(kind, check_mode, rows_read=len(table.rows))
    row_of: Dict[int, int] = {}
    inserted: List[int] = []

    for number, row in enumerate(_progress(table.rows, f"load {kind.value}"), start=1):
        key = row[0]
        try:
            _insert_row(target, kind, row, check=check_mode == CheckMode.IMMEDIATE)
        except MeshDBError as e:
            if check_mode == CheckMode.IMMEDIATE:
                for done in reversed(inserted):
                    _remove_row(target, kind, done)
                logger.info(f"Immediate load of {kind.value} aborted at row {number}; {len(inserted)} rows rolled back")
                raise ConstraintViolationError(e.message, row=number, violation=e.kind, **e.context) from e
            # Deferred mode only rejects rows failing key checks
            report.violations.append(Violation(
                ViolationKind(e.kind),
                elem_id=key if kind == TableKind.ELEMENTS else None,
                vertex_id=key if kind == TableKind.VERTICES else None,
                detail=e.message.replace(" ", "_"), row=number))
            continue
        row_of[key] = number
        inserted.append(key)

    report.rows_loaded = len(inserted)

    if check_mode == CheckMode.DEFERRED:
        checked = validate_mesh(target)
        for violation in checked.violations:
            key = violation.elem_id if kind == TableKind.ELEMENTS else violation.vertex_id
            if kind == TableKind.VERTICES and violation.elem_id is not None:
                continue
            if key in row_of:
                violation.row = row_of[key]
                report.violations.append(violation)
        report.violations.sort(key=lambda v: (v.row or 0, v.kind.value))

    logger.info(f"Loaded {report.rows_loaded}/{report.rows_read} {kind.value} rows "
                f"({check_mode.value}), {len(report.violations)} violation(s)")
    return report


def load_mesh(vertices_path: str, elements_path: str,
              check_mode: CheckMode = CheckMode.DEFERRED,
              mesh: Optional[Mesh] = None) -> Tuple[Mesh, List[LoadReport]]:
    """Vertex table first, then elements, into a new (or given) mesh"""
    mesh = mesh if mesh is not None else Mesh()
    vertices = read_tabular(vertices_path, VERTEX_SCHEMA)
    elements = read_tabular(elements_path, ELEMENT_SCHEMA)
    reports = [bulk_load(vertices, mesh, TableKind.VERTICES, check_mode)]
    reports.append(bulk_load(elements, mesh, TableKind.ELEMENTS, check_mode))
    return mesh, reports

