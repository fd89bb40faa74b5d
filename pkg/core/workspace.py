"""
Workspace
Directory holding one mesh, its derived tables, partition map, attribute store
and a JSON manifest recording representation policy and stage provenance
"""

import copy
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import pandas as pd

from core.attributes import AttributeStore
from core.errors import StaleIndexError, WorkspaceError, WorkspaceLockedError
from core.mesh import Cell, Mesh, RepresentationMode
from core.partition import PartitionMap, PartitionStage
from core.tabular import (
    CELL_SCHEMA,
    PARTITION_SCHEMA,
    CheckMode,
    TableKind,
    TabularFile,
    dump,
    load_mesh as load_mesh_tables,
    read_tabular,
    result_schema,
    write_tabular,
)

MANIFEST_FILE = "manifest.json"
LOCK_FILE = ".lock"
ATTRIBUTES_FILE = "attributes.json"
PARTITION_FILE = "partition.csv"
RESULTS_FILE = "results.csv"
TABLE_FILES = {
    TableKind.VERTICES: "vertices.csv",
    TableKind.ELEMENTS: "elements.csv",
    TableKind.INCIDENCE: "incidence.csv",
    TableKind.CELLS: "cells.csv",
}

DEFAULT_MANIFEST: Dict[str, Any] = {
    "format": 1,
    "mesh": {
        "vertices": 0,
        "elements": 0,
        "representation": "quadruple",
        "policy": "auto",
        "dual_threshold": 100000,
    },
    "stages": {
        "loaded": False,
        "validated": False,
        "normalized": False,
        "indexed": False,
        "partitioned": False,
        "scattered": False,
        "gathered": False,
    },
    "index": {
        "cells": 0,
        "morton_bits": 10,
    },
    "partition": {
        "stage": None,
        "parts": 0,
        "bootstrap": 0,
        "edge_cut": None,
        "ancestors": {},
    },
    "results": {
        "rows": 0,
        "bundles": 0,
    },
}


class Workspace:
    """A mesh workspace directory"""

    def __init__(self, root: str):
        self.logger = logging.getLogger(__name__)
        self.root = Path(root)
        self.manifest: Dict[str, Any] = copy.deepcopy(DEFAULT_MANIFEST)
        if self.manifest_path.exists():
            self.load_manifest()

    @classmethod
    def create(cls, root: str) -> "Workspace":
        try:
            Path(root).mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise WorkspaceError(f"cannot create workspace {root}: {e}") from e
        workspace = cls(root)
        workspace.save_manifest()
        return workspace

    @classmethod
    def open(cls, root: str) -> "Workspace":
        workspace = cls(root)
        if not workspace.manifest_path.exists():
            raise WorkspaceError(f"{root} is not a workspace (no {MANIFEST_FILE})")
        return workspace

    # ------------------------------------------------------------ manifest

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_FILE

    def path(self, name: str) -> Path:
        return self.root / name

    def table_path(self, kind: TableKind) -> Path:
        return self.root / TABLE_FILES[kind]

    def load_manifest(self):
        """Load manifest.json, keeping defaults for any missing key"""
        try:
            with open(self.manifest_path, "r", encoding="utf-8") as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise WorkspaceError(f"cannot read {self.manifest_path}: {e}") from e
        self.merge_manifest(loaded)

    def merge_manifest(self, loaded: Dict[str, Any]):
        for section, section_data in self.manifest.items():
            if section not in loaded:
                continue
            if isinstance(section_data, dict) and isinstance(loaded[section], dict):
                for key in section_data:
                    if key in loaded[section]:
                        self.manifest[section][key] = loaded[section][key]
            else:
                self.manifest[section] = loaded[section]

    def save_manifest(self):
        try:
            with open(self.manifest_path, "w", encoding="utf-8") as f:
                json.dump(self.manifest, f, indent=2, sort_keys=True)
        except OSError as e:
            raise WorkspaceError(f"cannot write {self.manifest_path}: {e}") from e

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.manifest.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value: Any):
        self.manifest.setdefault(section, {})[key] = value

    def mark(self, stage: str, done: bool = True):
        self.set("stages", stage, done)

    def info_lines(self) -> List[str]:
        """Flattened manifest as key=value lines"""
        lines = []
        for section in sorted(self.manifest):
            value = self.manifest[section]
            if isinstance(value, dict):
                for key in sorted(value):
                    item = value[key]
                    if isinstance(item, dict):
                        item = ";".join(f"{k}:{v}" for k, v in sorted(item.items())) or "-"
                    lines.append(f"{section}.{key}={_render(item)}")
            else:
                lines.append(f"{section}={_render(value)}")
        return lines

    # ------------------------------------------------------------- locking

    @contextmanager
    def lock(self) -> Iterator["Workspace"]:
        """Advisory writer lock held for the duration of the block"""
        lock_path = self.root / LOCK_FILE
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(f"workspace {self.root} is locked by another writer ({lock_path})")
        except OSError as e:
            raise WorkspaceError(f"cannot lock {self.root}: {e}") from e
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield self
        finally:
            try:
                lock_path.unlink()
            except FileNotFoundError:
                pass

    def is_locked(self) -> bool:
        return (self.root / LOCK_FILE).exists()

    # ---------------------------------------------------------------- mesh

    def save_mesh(self, m: Mesh):
        """Write the mesh tables present in memory and refresh the manifest"""
        dump(m, TableKind.VERTICES, str(self.table_path(TableKind.VERTICES)))
        dump(m, TableKind.ELEMENTS, str(self.table_path(TableKind.ELEMENTS)))
        if m.incidence is not None:
            dump(m, TableKind.INCIDENCE, str(self.table_path(TableKind.INCIDENCE)))
        elif self.table_path(TableKind.INCIDENCE).exists():
            self.table_path(TableKind.INCIDENCE).unlink()
        if m.cells is not None:
            dump(m, TableKind.CELLS, str(self.table_path(TableKind.CELLS)))
        elif self.table_path(TableKind.CELLS).exists():
            self.table_path(TableKind.CELLS).unlink()
        self.set("mesh", "vertices", m.vertex_count)
        self.set("mesh", "elements", m.element_count)
        self.set("mesh", "representation", m.mode.value)
        self.mark("normalized", m.incidence is not None)
        self.set("index", "cells", len(m.cells) if m.cells is not None else 0)
        self.mark("indexed", m.cells is not None)
        self.mark("loaded")
        self.save_manifest()
        self.logger.info(f"Saved mesh with {m.vertex_count} vertices and {m.element_count} elements to {self.root}")

    def has_mesh(self) -> bool:
        return self.table_path(TableKind.VERTICES).exists() and self.table_path(TableKind.ELEMENTS).exists()

    def load_mesh(self, check_mode: CheckMode = CheckMode.DEFERRED) -> Mesh:
        """Rebuild the in-memory mesh from the workspace tables"""
        if not self.has_mesh():
            raise WorkspaceError(f"workspace {self.root} holds no mesh; run load or gen-cube first")
        m, _ = load_mesh_tables(str(self.table_path(TableKind.VERTICES)),
                                str(self.table_path(TableKind.ELEMENTS)), check_mode)
        m.set_mode(RepresentationMode(self.get("mesh", "representation", "quadruple")))
        cells_path = self.table_path(TableKind.CELLS)
        if cells_path.exists():
            table = read_tabular(str(cells_path), CELL_SCHEMA)
            cells = {row[0]: Cell(*row) for row in table.rows}
            if set(cells) != set(m.element_ids):
                raise StaleIndexError(f"{cells_path.name} does not match the element table; run index build again")
            m.cells = cells
        return m

    def verify(self) -> List[str]:
        """Manifest/disk consistency problems, empty when consistent"""
        problems = []
        if self.get("stages", "loaded"):
            for kind, key in ((TableKind.VERTICES, "vertices"), (TableKind.ELEMENTS, "elements")):
                path = self.table_path(kind)
                if not path.exists():
                    problems.append(f"missing={path.name}")
                    continue
                rows = len(read_tabular(str(path)).rows)
                if rows != self.get("mesh", key):
                    problems.append(f"count_mismatch={path.name} manifest={self.get('mesh', key)} file={rows}")
        checks = (("normalized", TableKind.INCIDENCE), ("indexed", TableKind.CELLS))
        for stage, kind in checks:
            if self.get("stages", stage) and not self.table_path(kind).exists():
                problems.append(f"missing={TABLE_FILES[kind]} stage={stage}")
        if self.get("stages", "partitioned") and not self.path(PARTITION_FILE).exists():
            problems.append(f"missing={PARTITION_FILE} stage=partitioned")
        return problems

    # ----------------------------------------------------------- partition

    def save_partition(self, pm: PartitionMap, edge_cut: Optional[int] = None, bootstrap: int = 0):
        table = TabularFile(PARTITION_SCHEMA, sorted(pm.assignment.items()))
        write_tabular(str(self.path(PARTITION_FILE)), table)
        self.set("partition", "stage", pm.stage.value)
        self.set("partition", "parts", pm.parts)
        self.set("partition", "bootstrap", bootstrap or pm.parts)
        self.set("partition", "edge_cut", edge_cut)
        self.set("partition", "ancestors", {str(k): v for k, v in sorted(pm.ancestors.items())})
        self.mark("partitioned")
        self.save_manifest()

    def load_partition(self) -> PartitionMap:
        path = self.path(PARTITION_FILE)
        if not path.exists():
            raise WorkspaceError(f"workspace {self.root} has no partition map; run partition first")
        table = read_tabular(str(path), PARTITION_SCHEMA)
        ancestors = {int(k): int(v) for k, v in (self.get("partition", "ancestors") or {}).items()}
        return PartitionMap(dict(table.rows), int(self.get("partition", "parts")),
                            PartitionStage(self.get("partition", "stage")), ancestors)

    # ---------------------------------------------------------- attributes

    def load_attributes(self) -> AttributeStore:
        path = self.path(ATTRIBUTES_FILE)
        if not path.exists():
            return AttributeStore()
        return AttributeStore.load(str(path))

    def save_attributes(self, store: AttributeStore):
        store.save(str(self.path(ATTRIBUTES_FILE)))

    # ------------------------------------------------------------- results

    def save_results(self, frame: pd.DataFrame, bundles: int):
        """Keep the gathered result table next to the mesh"""
        table = TabularFile(result_schema(len(frame.columns) - 2), list(frame.itertuples(index=False, name=None)))
        write_tabular(str(self.path(RESULTS_FILE)), table)
        self.set("results", "rows", int(len(frame)))
        self.set("results", "bundles", bundles)
        self.mark("gathered")
        self.save_manifest()


def _render(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)

