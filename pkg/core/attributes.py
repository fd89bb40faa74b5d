"""
Attributes
Topology entities, classification of mesh entities onto them, attribute
bindings and their inheritance-based resolution
"""

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import pandas as pd

from core.errors import (
    AmbiguousInheritanceError,
    DuplicateIdError,
    DuplicateNameError,
    InvalidAttributeError,
    NotFoundError,
    UnknownEntityError,
    WorkspaceError,
)

logger = logging.getLogger(__name__)

AttributeValue = Union[float, Tuple[float, ...], str]


class TopoKind(Enum):
    REGION = "region"
    FACE = "face"
    EDGE = "edge"
    VERTEX = "vertex"

    @property
    def lower(self) -> Optional["TopoKind"]:
        """Kind referenced by this kind's boundary links"""
        order = list(TopoKind)
        index = order.index(self)
        return order[index + 1] if index + 1 < len(order) else None


class MeshEntityKind(Enum):
    ELEMENT = "element"
    VERTEX = "vertex"

    @property
    def topo_kind(self) -> TopoKind:
        # An element is a piece of volume, so it queries as a region
        return TopoKind.REGION if self == MeshEntityKind.ELEMENT else TopoKind.VERTEX


class CoordinateSystem(Enum):
    CARTESIAN = "cartesian"
    CYLINDRICAL = "cylindrical"
    SPHERICAL = "spherical"


class ValueKind(Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    EXPRESSION = "expression"


@dataclass(frozen=True)
class TopoEntity:
    kind: TopoKind
    id: int

    @property
    def sort_key(self) -> Tuple[int, int]:
        return (list(TopoKind).index(self.kind), self.id)

    def __lt__(self, other: "TopoEntity") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.id}"

    @classmethod
    def parse(cls, text: str) -> "TopoEntity":
        """Parse "region:1" style references"""
        kind, sep, ident = text.partition(":")
        try:
            entity = cls(TopoKind(kind.strip().lower()), int(ident))
        except ValueError:
            raise InvalidAttributeError(f"bad entity reference {text!r}, expected kind:id")
        if not sep or entity.id <= 0:
            raise InvalidAttributeError(f"bad entity reference {text!r}, expected kind:id")
        return entity


def value_kind(value: AttributeValue) -> ValueKind:
    if isinstance(value, str):
        return ValueKind.EXPRESSION
    if isinstance(value, tuple):
        return ValueKind.VECTOR
    return ValueKind.SCALAR


def encode_value(value: AttributeValue) -> str:
    """Text form used in tables: repr floats, ';' between vector components"""
    kind = value_kind(value)
    if kind == ValueKind.SCALAR:
        return repr(float(value))
    if kind == ValueKind.VECTOR:
        return ";".join(repr(float(v)) for v in value)
    return value


def decode_value(kind: ValueKind, text: str) -> AttributeValue:
    if kind == ValueKind.SCALAR:
        return float(text)
    if kind == ValueKind.VECTOR:
        return tuple(float(v) for v in text.split(";"))
    return text


@dataclass
class AttributeBinding:
    """A named value attached to a topology entity"""
    name: str
    value: AttributeValue
    context: CoordinateSystem = CoordinateSystem.CARTESIAN
    scope: FrozenSet[TopoKind] = frozenset({TopoKind.REGION})
    group: Optional[str] = None
    time_dependent: bool = False
    # (time, value) pairs; carried as-is, never interpolated
    samples: List[Tuple[float, AttributeValue]] = field(default_factory=list)

    def __post_init__(self):
        if not self.name:
            raise InvalidAttributeError("attribute name is empty")
        if isinstance(self.value, list):
            self.value = tuple(self.value)
        if isinstance(self.value, (int, float)) and not isinstance(self.value, bool):
            self.value = float(self.value)
        self._check_value(self.value)
        if isinstance(self.value, tuple):
            self.value = tuple(float(v) for v in self.value)
        self.scope = frozenset(self.scope)
        if not self.scope:
            raise InvalidAttributeError(f"attribute {self.name} has an empty scope")
        if self.samples and not self.time_dependent:
            raise InvalidAttributeError(f"attribute {self.name} has samples but is not time dependent")
        for time, value in self.samples:
            if not math.isfinite(time):
                raise InvalidAttributeError(f"attribute {self.name} has a non-finite sample time")
            self._check_value(value)

    def _check_value(self, value: Any):
        if isinstance(value, str):
            return
        if isinstance(value, tuple):
            if not value or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in value):
                raise InvalidAttributeError(f"attribute {self.name} vector must hold finite floats")
            return
        if isinstance(value, float) and math.isfinite(value):
            return
        raise InvalidAttributeError(f"attribute {self.name} has invalid value {value!r}")

    @property
    def kind(self) -> ValueKind:
        return value_kind(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "value": list(self.value) if isinstance(self.value, tuple) else self.value,
            "context": self.context.value,
            "scope": sorted(k.value for k in self.scope),
            "group": self.group,
            "time_dependent": self.time_dependent,
            "samples": [[t, list(v) if isinstance(v, tuple) else v] for t, v in self.samples],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttributeBinding":
        def restore(raw):
            return tuple(raw) if isinstance(raw, list) else raw

        return cls(
            name=data["name"],
            value=restore(data["value"]),
            context=CoordinateSystem(data.get("context", "cartesian")),
            scope=frozenset(TopoKind(k) for k in data.get("scope", ["region"])),
            group=data.get("group"),
            time_dependent=data.get("time_dependent", False),
            samples=[(float(t), restore(v)) for t, v in data.get("samples", [])],
        )


@dataclass(frozen=True)
class ResolvedAttribute:
    name: str
    value: AttributeValue
    context: CoordinateSystem
    provenance: TopoEntity
    # Upward steps from the classification target to the provenance
    distance: int = 0
    group: Optional[str] = None
    time_dependent: bool = False

    @property
    def kind(self) -> ValueKind:
        return value_kind(self.value)


class Topology:
    """Regions, faces, edges and vertices with downward boundary links"""

    def __init__(self):
        self.entities: Set[TopoEntity] = set()
        self.boundary: Dict[TopoEntity, Set[TopoEntity]] = defaultdict(set)
        self.parents: Dict[TopoEntity, Set[TopoEntity]] = defaultdict(set)

    def __contains__(self, entity: TopoEntity) -> bool:
        return entity in self.entities

    def require(self, entity: TopoEntity):
        if entity not in self.entities:
            raise UnknownEntityError(f"{entity} does not exist", entity=str(entity))

    def add(self, kind: TopoKind, entity_id: int, boundary: Iterable[int] = ()) -> TopoEntity:
        """Add an entity bounded by existing entities of the next lower kind"""
        if isinstance(entity_id, bool) or not isinstance(entity_id, int) or entity_id <= 0:
            raise InvalidAttributeError(f"{kind.value} id must be a positive integer, got {entity_id!r}")
        entity = TopoEntity(kind, entity_id)
        if entity in self.entities:
            raise DuplicateIdError(f"{entity} already exists", entity=str(entity))
        boundary = list(boundary)
        if boundary and kind.lower is None:
            raise InvalidAttributeError("vertices have no boundary")
        boundary = [TopoEntity(kind.lower, int(b)) for b in boundary]
        for child in boundary:
            self.require(child)

        self.entities.add(entity)
        for child in boundary:
            self.boundary[entity].add(child)
            self.parents[child].add(entity)
        return entity

    def upward_levels(self, start: TopoEntity) -> List[List[TopoEntity]]:
        """Breadth-first levels following upward links, nearest first"""
        self.require(start)
        levels = [[start]]
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = sorted({p for e in frontier for p in self.parents.get(e, ()) if p not in seen})
            if not nxt:
                break
            seen.update(nxt)
            levels.append(nxt)
            frontier = nxt
        return levels

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entities": [[e.kind.value, e.id, sorted(c.id for c in self.boundary.get(e, ()))]
                         for e in sorted(self.entities, key=lambda e: (-e.sort_key[0], e.id))],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Topology":
        topo = cls()
        # Lower kinds first so boundary references resolve
        for kind, entity_id, boundary in data.get("entities", []):
            topo.add(TopoKind(kind), int(entity_id), boundary)
        return topo


class Classification:
    """Mesh entity -> topology entity it lies on"""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.elements: Dict[int, TopoEntity] = {}
        self.vertices: Dict[int, TopoEntity] = {}

    def classify_element(self, elem_id: int, region_id: int):
        region = TopoEntity(TopoKind.REGION, region_id)
        self.topology.require(region)
        self.elements[elem_id] = region

    def classify_vertex(self, vertex_id: int, target: TopoEntity):
        self.topology.require(target)
        self.vertices[vertex_id] = target

    def target_of(self, kind: MeshEntityKind, entity_id: int) -> TopoEntity:
        table = self.elements if kind == MeshEntityKind.ELEMENT else self.vertices
        try:
            return table[entity_id]
        except KeyError:
            raise NotFoundError(f"{kind.value} {entity_id} is not classified", entity=f"{kind.value}:{entity_id}")

    def unclassified(self, elem_ids: Iterable[int]) -> List[int]:
        return sorted(e for e in elem_ids if e not in self.elements)


@dataclass
class AttributeTable:
    """Per-element results of a bulk resolution plus what could not be resolved"""
    rows: List[Tuple[int, ResolvedAttribute]] = field(default_factory=list)
    # (ElemID, attribute name, error kind)
    unresolved: List[Tuple[int, str, str]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        records = [{
            "elem_id": elem_id,
            "name": r.name,
            "kind": r.kind.value,
            "value": encode_value(r.value),
            "context": r.context.value,
            "source_kind": r.provenance.kind.value,
            "source_id": r.provenance.id,
        } for elem_id, r in self.rows]
        columns = ["elem_id", "name", "kind", "value", "context", "source_kind", "source_id"]
        return pd.DataFrame.from_records(records, columns=columns)

    def report_lines(self) -> List[str]:
        return [f"unresolved elem_id={e} name={name} error={kind}" for e, name, kind in self.unresolved]


class AttributeStore:
    """Bindings on topology entities, resolved onto classified mesh entities"""

    def __init__(self, topology: Optional[Topology] = None):
        self.logger = logging.getLogger(__name__)
        self.topology = topology or Topology()
        self.classification = Classification(self.topology)
        self.bindings: Dict[TopoEntity, Dict[str, AttributeBinding]] = defaultdict(dict)

    def assign(self, entity: TopoEntity, binding: AttributeBinding):
        self.topology.require(entity)
        on_entity = self.bindings[entity]
        if binding.name in on_entity:
            raise DuplicateNameError(f"{entity} already has attribute {binding.name}",
                                     entity=str(entity), name=binding.name)
        on_entity[binding.name] = binding
        self.logger.debug(f"Assigned {binding.name} to {entity}")

    def binding(self, entity: TopoEntity, name: str) -> AttributeBinding:
        self.topology.require(entity)
        try:
            return self.bindings[entity][name]
        except KeyError:
            raise NotFoundError(f"{entity} has no attribute {name}", entity=str(entity), name=name)

    def names(self) -> List[str]:
        return sorted({name for on_entity in self.bindings.values() for name in on_entity})

    def group_members(self, group: str) -> List[Tuple[TopoEntity, str]]:
        """Bindings sharing a group id"""
        return sorted((entity, name) for entity, on_entity in self.bindings.items()
                      for name, b in on_entity.items() if b.group == group)

    # ------------------------------------------------------------ resolution

    def resolve_from(self, target: TopoEntity, queried: TopoKind, name: str) -> ResolvedAttribute:
        """Nearest eligible binding walking up from `target`.

        A binding is eligible when the queried kind or the target's kind is in
        its scope. Two eligible bindings at the same distance are ambiguous.
        """
        kinds = {queried, target.kind}
        for distance, level in enumerate(self.topology.upward_levels(target)):
            matches = []
            for entity in level:
                b = self.bindings.get(entity, {}).get(name)
                if b is not None and kinds & b.scope:
                    matches.append((entity, b))
            if len(matches) > 1:
                raise AmbiguousInheritanceError(
                    f"{name} is bound on {', '.join(str(e) for e, _ in matches)} at the same distance from {target}",
                    entity=str(target), name=name)
            if matches:
                entity, b = matches[0]
                return ResolvedAttribute(b.name, b.value, b.context, entity, distance, b.group, b.time_dependent)
        raise NotFoundError(f"no eligible {name} reachable from {target}", entity=str(target), name=name)

    def resolve(self, kind: MeshEntityKind, entity_id: int, name: str) -> ResolvedAttribute:
        target = self.classification.target_of(kind, entity_id)
        return self.resolve_from(target, kind.topo_kind, name)

    def resolve_element(self, elem_id: int, name: str) -> ResolvedAttribute:
        return self.resolve(MeshEntityKind.ELEMENT, elem_id, name)

    def resolve_vertex(self, vertex_id: int, name: str) -> ResolvedAttribute:
        return self.resolve(MeshEntityKind.VERTEX, vertex_id, name)

    def resolve_all(self, elem_ids: Iterable[int], names: Optional[Iterable[str]] = None) -> AttributeTable:
        """Resolve every name for every element, collecting failures instead of raising"""
        names = sorted(names) if names is not None else self.names()
        table = AttributeTable()
        for elem_id in sorted(elem_ids):
            for name in names:
                try:
                    table.rows.append((elem_id, self.resolve_element(elem_id, name)))
                except (NotFoundError, AmbiguousInheritanceError) as e:
                    table.unresolved.append((elem_id, name, e.kind))
        if table.unresolved:
            self.logger.warning(f"{len(table.unresolved)} element attribute(s) could not be resolved")
        return table

    # ----------------------------------------------------------- persistence

    def to_dict(self) -> Dict[str, Any]:
        return {
            "topology": self.topology.to_dict(),
            "classification": {
                "elements": [[e, t.id] for e, t in sorted(self.classification.elements.items())],
                "vertices": [[v, t.kind.value, t.id] for v, t in sorted(self.classification.vertices.items())],
            },
            "bindings": [dict(b.to_dict(), entity=[entity.kind.value, entity.id])
                         for entity in sorted(self.bindings) for b in self.bindings[entity].values()],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttributeStore":
        store = cls(Topology.from_dict(data.get("topology", {})))
        classification = data.get("classification", {})
        for elem_id, region_id in classification.get("elements", []):
            store.classification.classify_element(int(elem_id), int(region_id))
        for vertex_id, kind, entity_id in classification.get("vertices", []):
            store.classification.classify_vertex(int(vertex_id), TopoEntity(TopoKind(kind), int(entity_id)))
        for record in data.get("bindings", []):
            kind, entity_id = record["entity"]
            store.assign(TopoEntity(TopoKind(kind), int(entity_id)), AttributeBinding.from_dict(record))
        return store

    def save(self, path: str):
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        except OSError as e:
            raise WorkspaceError(f"cannot save attributes to {path}: {e}") from e

    @classmethod
    def load(cls, path: str) -> "AttributeStore":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise WorkspaceError(f"cannot load attributes from {path}: {e}") from e
        try:
            return cls.from_dict(data)
        except (KeyError, ValueError, TypeError) as e:
            raise WorkspaceError(f"attribute file {path} is malformed: {e}") from e
