"""
Partition bundles
Scatter a partitioned mesh into per-partition bundle directories and gather
solver result bundles back through a staging area
"""

import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from core.attributes import AttributeStore, encode_value
from core.errors import (
    DestinationUnwritableError,
    DuplicateKeyError,
    GraphMeshMismatchError,
    MalformedBundleError,
    MeshDBError,
)
from core.mesh import Mesh, Tetrahedron, Vertex
from core.partition import HaloSpec, PartitionMap
from core.tabular import (
    ELEMENT_SCHEMA,
    VERTEX_SCHEMA,
    ColumnType,
    TabularFile,
    read_tabular,
    result_schema,
    schema,
    write_tabular,
)

logger = logging.getLogger(__name__)

HEADER_SCHEMA = schema("partition:int", "parts:int", "stage:text", "ancestor:int",
                       "vertices:int", "elements:int", "ghosts:int", "attributes:int")
GHOST_SCHEMA = schema("vertex_id:int")
ATTRIBUTE_SCHEMA = schema("elem_id:int", "name:text", "kind:text", "value:text",
                          "context:text", "source_kind:text", "source_id:int")

SECTION_FILES = {
    "header": "header.csv",
    "vertices": "vertices.csv",
    "elements": "elements.csv",
    "ghosts": "ghosts.csv",
    "attributes": "attributes.csv",
}
RESULTS_FILE = "results.csv"


def bundle_name(partition: int) -> str:
    return f"part-{partition:04d}"


@dataclass
class PartitionBundle:
    """Everything one solver process needs for its partition"""
    partition: int
    parts: int
    stage: str
    ancestor: int
    vertices: List[Vertex] = field(default_factory=list)
    elements: List[Tetrahedron] = field(default_factory=list)
    ghosts: List[int] = field(default_factory=list)
    # Rows in ATTRIBUTE_SCHEMA order
    attributes: List[Tuple] = field(default_factory=list)

    def counts(self) -> Tuple[int, int, int, int]:
        return (len(self.vertices), len(self.elements), len(self.ghosts), len(self.attributes))


def build_bundle(m: Mesh, pm: PartitionMap, halos: HaloSpec, partition: int,
                 store: Optional[AttributeStore] = None) -> PartitionBundle:
    halo = halos[partition]
    bundle = PartitionBundle(partition, pm.parts, pm.stage.value, pm.ancestors.get(partition, partition))
    bundle.vertices = [m.get_vertex(v) for v in sorted(halo.required)]
    bundle.elements = [m.get_element(e) for e in halo.owned]
    bundle.ghosts = sorted(halo.ghosts)
    if store is not None:
        table = store.resolve_all(halo.owned)
        bundle.attributes = [
            (elem_id, r.name, r.kind.value, encode_value(r.value), r.context.value,
             r.provenance.kind.value, r.provenance.id)
            for elem_id, r in table.rows
        ]
        if table.unresolved:
            logger.warning(f"Partition {partition}: {len(table.unresolved)} attribute(s) left unresolved")
    return bundle


def write_bundle(bundle: PartitionBundle, directory: str) -> str:
    """Write the five sections of a bundle into `directory`"""
    n_vertices, n_elements, n_ghosts, n_attributes = bundle.counts()
    sections = {
        "header": TabularFile(HEADER_SCHEMA, [(bundle.partition, bundle.parts, bundle.stage, bundle.ancestor,
                                               n_vertices, n_elements, n_ghosts, n_attributes)]),
        "vertices": TabularFile(VERTEX_SCHEMA, [(v.id, v.x, v.y, v.z) for v in bundle.vertices]),
        "elements": TabularFile(ELEMENT_SCHEMA, [(t.id,) + tuple(t.corners) for t in bundle.elements]),
        "ghosts": TabularFile(GHOST_SCHEMA, [(v,) for v in bundle.ghosts]),
        "attributes": TabularFile(ATTRIBUTE_SCHEMA, list(bundle.attributes)),
    }
    for section, table in sections.items():
        write_tabular(os.path.join(directory, SECTION_FILES[section]), table)
    return directory


def read_bundle(directory: str) -> PartitionBundle:
    """Read a bundle back and check its header counts against the sections"""
    schemas = {
        "header": HEADER_SCHEMA,
        "vertices": VERTEX_SCHEMA,
        "elements": ELEMENT_SCHEMA,
        "ghosts": GHOST_SCHEMA,
        "attributes": ATTRIBUTE_SCHEMA,
    }
    tables: Dict[str, TabularFile] = {}
    for section, expected in schemas.items():
        path = os.path.join(directory, SECTION_FILES[section])
        try:
            tables[section] = read_tabular(path, expected)
        except MeshDBError as e:
            raise MalformedBundleError(f"bundle {directory}: {section} section unreadable ({e.message})",
                                       bundle=directory) from e

    if len(tables["header"].rows) != 1:
        raise MalformedBundleError(f"bundle {directory}: header must hold exactly one row", bundle=directory)
    partition, parts, stage, ancestor, *counts = tables["header"].rows[0]
    bundle = PartitionBundle(partition, parts, stage, ancestor)
    bundle.vertices = [Vertex(*row) for row in tables["vertices"].rows]
    bundle.elements = [Tetrahedron(row[0], tuple(row[1:])) for row in tables["elements"].rows]
    bundle.ghosts = [row[0] for row in tables["ghosts"].rows]
    bundle.attributes = list(tables["attributes"].rows)
    if tuple(counts) != bundle.counts():
        raise MalformedBundleError(
            f"bundle {directory}: header counts {tuple(counts)} do not match sections {bundle.counts()}",
            bundle=directory)
    return bundle


def scatter(m: Mesh, pm: PartitionMap, halos: HaloSpec, destination: str,
            store: Optional[AttributeStore] = None, workers: int = 4) -> List[str]:
    """Write one bundle per partition under `destination`; returns bundle paths"""
    pm.check_total(m.element_ids)
    if sorted(halos.partitions) != list(range(pm.parts)):
        raise GraphMeshMismatchError(f"halos cover {len(halos.partitions)} partitions, map has {pm.parts}")
    for part, halo in halos.partitions.items():
        if halo.owned != pm.members(part):
            raise GraphMeshMismatchError(f"halo of partition {part} does not match the partition map")

    try:
        os.makedirs(destination, exist_ok=True)
    except OSError as e:
        raise DestinationUnwritableError(f"cannot create {destination}: {e}") from e

    bundles = [build_bundle(m, pm, halos, part, store) for part in range(pm.parts)]
    paths = [os.path.join(destination, bundle_name(b.partition)) for b in bundles]
    # Bundles are independent, so they are written concurrently
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(write_bundle, b, p) for b, p in zip(bundles, paths)]
        for future in tqdm(futures, desc="scatter", unit="bundle", file=sys.stderr,
                           disable=not sys.stderr.isatty()):
            future.result()

    logger.info(f"Scattered {m.element_count} elements into {len(paths)} bundles under {destination}")
    return paths


def reassemble_mesh(bundles: Sequence[PartitionBundle]) -> Mesh:
    """Concatenate owned elements and deduplicate vertices"""
    m = Mesh()
    for bundle in bundles:
        for vertex in bundle.vertices:
            known = m.vertices.get(vertex.id)
            if known is None:
                m.add_vertex(vertex)
            elif known.coords != vertex.coords:
                raise MalformedBundleError(
                    f"vertex {vertex.id} has different coordinates in partition {bundle.partition}",
                    vertex_id=vertex.id)
    for bundle in sorted(bundles, key=lambda b: b.partition):
        for t in bundle.elements:
            m.add_tetrahedron(t.id, t.corners)
    return m


# ---------------------------------------------------------------- gather

def write_result_bundle(directory: str, rows: Sequence[Tuple], state_count: int) -> str:
    """Solver output for one partition: (elem_id, sample, s0..sS-1) rows"""
    write_tabular(os.path.join(directory, RESULTS_FILE), TabularFile(result_schema(state_count), list(rows)))
    return directory


def _stage(bundle_dirs: Sequence[str], staging: str) -> List[str]:
    try:
        os.makedirs(staging, exist_ok=True)
    except OSError as e:
        raise DestinationUnwritableError(f"cannot create staging area {staging}: {e}") from e

    staged = []
    for index, directory in enumerate(bundle_dirs):
        source = os.path.join(directory, RESULTS_FILE)
        if not os.path.isfile(source):
            raise MalformedBundleError(f"bundle {directory} has no {RESULTS_FILE}", bundle=directory)
        target_dir = os.path.join(staging, f"{index:04d}-{os.path.basename(os.path.normpath(directory))}")
        try:
            os.makedirs(target_dir, exist_ok=True)
            target = shutil.copy2(source, os.path.join(target_dir, RESULTS_FILE))
        except OSError as e:
            raise DestinationUnwritableError(f"cannot stage {source}: {e}") from e
        staged.append(target)
    return staged


def _load_staged(path: str) -> TabularFile:
    try:
        table = read_tabular(path)
    except MeshDBError as e:
        raise MalformedBundleError(f"staged result {path} is unreadable ({e.message})", bundle=path) from e
    columns = table.columns
    if len(columns) < 2 or columns != result_schema(len(columns) - 2):
        raise MalformedBundleError(
            f"staged result {path} has columns {table.names}, expected elem_id,sample,s0..", bundle=path)
    if any(c.type != ColumnType.FLOAT for c in columns[2:]):
        raise MalformedBundleError(f"staged result {path} has non-float state columns", bundle=path)
    return table


def gather(bundle_dirs: Sequence[str], staging: str, loader_concurrency: int = 1) -> pd.DataFrame:
    """Copy result bundles to staging, then load them with at most
    `loader_concurrency` concurrent loaders into one table keyed by (elem_id, sample)"""
    staged = _stage(bundle_dirs, staging)
    logger.info(f"Staged {len(staged)} result bundles in {staging}")

    with ThreadPoolExecutor(max_workers=max(1, loader_concurrency)) as executor:
        futures = [executor.submit(_load_staged, path) for path in staged]
        tables = [f.result() for f in tqdm(futures, desc="gather", unit="bundle", file=sys.stderr,
                                           disable=not sys.stderr.isatty())]

    widths = {len(t.columns) for t in tables}
    if len(widths) > 1:
        raise MalformedBundleError(f"result bundles disagree on state width: {sorted(w - 2 for w in widths)}")

    names = tables[0].names if tables else ["elem_id", "sample"]
    frame = pd.DataFrame.from_records([row for t in tables for row in t.rows], columns=names)
    duplicated = frame.duplicated(subset=["elem_id", "sample"], keep="first")
    if duplicated.any():
        first = frame[duplicated].iloc[0]
        raise DuplicateKeyError(
            f"result key (elem_id={int(first['elem_id'])}, sample={int(first['sample'])}) appears in more than one row",
            elem_id=int(first["elem_id"]), sample=int(first["sample"]))

    frame = frame.sort_values(["elem_id", "sample"], kind="mergesort").reset_index(drop=True)
    logger.info(f"Gathered {len(frame)} result rows from {len(staged)} bundles "
                f"with {loader_concurrency} loader(s)")
    return frame
