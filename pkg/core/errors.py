"""
Error types
Every failure raised by the engine carries a stable kind string and the ids involved
"""

from typing import Any, Dict, Optional


class MeshDBError(Exception):
    """Base class for engine errors"""

    kind = "error"
    # Exit status used by the command line front end
    exit_code = 2

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    @property
    def row(self) -> Optional[int]:
        return self.context.get("row")

    @property
    def elem_id(self) -> Optional[int]:
        return self.context.get("elem_id")

    @property
    def vertex_id(self) -> Optional[int]:
        return self.context.get("vertex_id")

    def to_record(self) -> Dict[str, Any]:
        """Flat key=value view used by reports"""
        record: Dict[str, Any] = {"error": self.kind}
        record.update(self.context)
        record["message"] = self.message
        return record


# core model

class InvalidIdError(MeshDBError):
    kind = "invalid-id"


class DuplicateIdError(MeshDBError):
    kind = "duplicate-id"


class NonFiniteCoordinateError(MeshDBError):
    kind = "non-finite-coordinate"


class DanglingVertexError(MeshDBError):
    kind = "dangling-vertex"


class DegenerateElementError(MeshDBError):
    kind = "degenerate-element"


class DuplicateElementError(MeshDBError):
    kind = "duplicate-element"


class FlatBoxError(MeshDBError):
    kind = "flat-box"


class UnknownVertexError(MeshDBError):
    kind = "unknown-vertex"


class UnknownElementError(MeshDBError):
    kind = "unknown-element"


class VertexInUseError(MeshDBError):
    kind = "vertex-in-use"


# views

class IncompleteElementError(MeshDBError):
    kind = "incomplete-element"


class MalformedRankError(MeshDBError):
    kind = "malformed-rank"


class DivergenceError(MeshDBError):
    kind = "divergence"


# spatial index

class StaleIndexError(MeshDBError):
    kind = "stale-index"


class OutOfFrameError(MeshDBError):
    kind = "out-of-frame"


# partitioning and distribution

class InvalidPartitionCountError(MeshDBError):
    kind = "invalid-partition-count"
    exit_code = 1


class EmptyMeshError(MeshDBError):
    kind = "empty-mesh"


class GraphMeshMismatchError(MeshDBError):
    kind = "graph-mesh-mismatch"


class DestinationUnwritableError(MeshDBError):
    kind = "destination-unwritable"
    exit_code = 1


class MalformedBundleError(MeshDBError):
    kind = "malformed-bundle"


class DuplicateKeyError(MeshDBError):
    kind = "duplicate-key"


# attributes

class UnknownEntityError(MeshDBError):
    kind = "unknown-entity"


class DuplicateNameError(MeshDBError):
    kind = "duplicate-name-on-entity"


class NotFoundError(MeshDBError):
    kind = "not-found"


class AmbiguousInheritanceError(MeshDBError):
    kind = "ambiguous-inheritance"


class InvalidAttributeError(MeshDBError):
    kind = "invalid-attribute"
    exit_code = 1


# io

class ParseError(MeshDBError):
    kind = "parse-error"
    exit_code = 1

    def __init__(self, message: str, line: int, **context: Any):
        super().__init__(f"line {line}: {message}", line=line, **context)
        self.line = line


class SchemaMismatchError(MeshDBError):
    kind = "schema-mismatch"
    exit_code = 1


class ConstraintViolationError(MeshDBError):
    kind = "constraint-violation"

    def __init__(self, message: str, row: int, violation: str, **context: Any):
        super().__init__(f"row {row}: {message}", row=row, violation=violation, **context)
        self.violation = violation


class InvalidQueryError(MeshDBError):
    kind = "invalid-query"
    exit_code = 1


class WorkspaceError(MeshDBError):
    kind = "workspace"
    exit_code = 1


class WorkspaceLockedError(WorkspaceError):
    kind = "workspace-locked"
