"""
Partitioner
Two-step partitioning: recursive coordinate bisection for the bootstrap
partitions, then greedy refinement on the element graph, plus halo computation
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from core.errors import (
    EmptyMeshError,
    GraphMeshMismatchError,
    InvalidPartitionCountError,
)
from core.mesh import Mesh
from core.views import ElementGraph, graph_edges

logger = logging.getLogger(__name__)

DEFAULT_BOOTSTRAP = 8
DEFAULT_IMBALANCE = 1.05
DEFAULT_PASSES = 10


class PartitionStage(Enum):
    BOOTSTRAP = "bootstrap"
    REFINED = "refined"


@dataclass
class PartitionMap:
    """ElemID -> partition id in [0, parts)"""
    assignment: Dict[int, int]
    parts: int
    stage: PartitionStage = PartitionStage.BOOTSTRAP
    # Refined partition -> bootstrap partition it derives from
    ancestors: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.ancestors:
            self.ancestors = {p: p for p in range(self.parts)}

    def members(self, part: int) -> List[int]:
        return sorted(e for e, p in self.assignment.items() if p == part)

    def sizes(self) -> List[int]:
        sizes = [0] * self.parts
        for part in self.assignment.values():
            sizes[part] += 1
        return sizes

    def copy(self) -> "PartitionMap":
        return PartitionMap(dict(self.assignment), self.parts, self.stage, dict(self.ancestors))

    def check_total(self, ids: Iterable[int]):
        ids = set(ids)
        if set(self.assignment) != ids:
            missing = len(ids - set(self.assignment))
            extra = len(set(self.assignment) - ids)
            raise GraphMeshMismatchError(
                f"partition map covers a different element set ({missing} missing, {extra} extra)")
        bad = [e for e, p in self.assignment.items() if not 0 <= p < self.parts]
        if bad:
            raise GraphMeshMismatchError(f"element {bad[0]} assigned outside 0..{self.parts - 1}", elem_id=bad[0])


@dataclass
class PartitionHalo:
    """What one partition owns and what it must see"""
    owned: List[int]
    required: Set[int]
    ghosts: Set[int]


@dataclass
class HaloSpec:
    partitions: Dict[int, PartitionHalo]

    def __getitem__(self, part: int) -> PartitionHalo:
        return self.partitions[part]


@dataclass
class BalanceReport:
    stage: PartitionStage
    sizes: List[int]
    imbalance: float
    edge_cut: int

    def lines(self) -> List[str]:
        lines = [f"stage={self.stage.value} parts={len(self.sizes)} edge_cut={self.edge_cut} "
                 f"max_avg_ratio={self.imbalance:.6f}"]
        lines.extend(f"partition={p} elements={size}" for p, size in enumerate(self.sizes))
        return lines


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


# ---------------------------------------------------------------- bootstrap

def rcb(m: Mesh, parts: int = DEFAULT_BOOTSTRAP) -> PartitionMap:
    """Recursive coordinate bisection of element centroids.

    Each level splits at the median along the axis of largest extent
    (x before y before z on ties); elements equal to the median are ordered
    by ElemID. Leaf sizes differ by at most one.
    """
    if not is_power_of_two(parts):
        raise InvalidPartitionCountError(f"partition count must be a power of two, got {parts}")
    if m.element_count == 0:
        raise EmptyMeshError("cannot partition an empty mesh")

    ids = list(m.element_ids)
    centroids = {elem_id: m.centroid(elem_id) for elem_id in ids}
    assignment = _bisect_points(ids, centroids, parts, 0)
    logger.info(f"Bootstrap RCB placed {len(ids)} elements into {parts} partitions")
    return PartitionMap(assignment, parts, PartitionStage.BOOTSTRAP)


def _bisect_points(ids: List[int], points: Dict[int, np.ndarray], parts: int, base: int) -> Dict[int, int]:
    if parts == 1 or not ids:
        return {elem_id: base for elem_id in ids}

    coords = np.array([points[e] for e in ids])
    extent = coords.max(axis=0) - coords.min(axis=0)
    axis = int(np.argmax(extent))
    ordered = sorted(ids, key=lambda e: (points[e][axis], e))
    cut = (len(ordered) + 1) // 2

    half = parts // 2
    assignment = _bisect_points(ordered[:cut], points, half, base)
    assignment.update(_bisect_points(ordered[cut:], points, half, base + half))
    return assignment


# ---------------------------------------------------------------- quality

def edge_cut(g: ElementGraph, pm: PartitionMap) -> int:
    """Number of graph edges whose endpoints lie in different partitions"""
    pm.check_total(g.keys())
    return sum(1 for u, v in graph_edges(g) if pm.assignment[u] != pm.assignment[v])


def balance_report(g: ElementGraph, pm: PartitionMap) -> BalanceReport:
    sizes = pm.sizes()
    average = len(pm.assignment) / pm.parts if pm.parts else 0.0
    ratio = max(sizes) / average if average else 0.0
    return BalanceReport(pm.stage, sizes, ratio, edge_cut(g, pm))


# ---------------------------------------------------------------- refinement

def _grow_order(members: Set[int], g: ElementGraph, seed: int) -> List[int]:
    """Breadth-first order of `members` starting at seed, restarting at the
    smallest unvisited id when the induced subgraph is disconnected"""
    order: List[int] = []
    seen: Set[int] = set()
    pending = sorted(members)
    start = seed
    while True:
        queue = deque([start])
        seen.add(start)
        while queue:
            node = queue.popleft()
            order.append(node)
            for nb in sorted(g[node]):
                if nb in members and nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        remaining = [e for e in pending if e not in seen]
        if not remaining:
            return order
        start = remaining[0]


def _peripheral(members: Set[int], g: ElementGraph) -> int:
    """A node far from the smallest id, found with two breadth-first sweeps"""
    start = min(members)
    far = _grow_order(members, g, start)[-1]
    return _grow_order(members, g, far)[-1]


def _bisect_graph(members: Set[int], g: ElementGraph, first_size: int) -> Tuple[Set[int], Set[int]]:
    order = _grow_order(members, g, _peripheral(members, g))
    first = set(order[:first_size])
    return first, members - first


def split_largest(pm: PartitionMap, target: int, g: ElementGraph) -> PartitionMap:
    """Grow a map to `target` partitions by bisecting the largest partition"""
    result = pm.copy()
    while result.parts < target:
        sizes = result.sizes()
        largest = max(range(result.parts), key=lambda p: (sizes[p], -p))
        members = set(result.members(largest))
        new_part = result.parts
        result.parts += 1
        result.ancestors[new_part] = result.ancestors.get(largest, largest)
        if members:
            _, moved = _bisect_graph(members, g, (len(members) + 1) // 2)
            for elem_id in moved:
                result.assignment[elem_id] = new_part
    return result


def _move_gain(node: int, g: ElementGraph, assignment: Dict[int, int]) -> Tuple[int, int]:
    """Best (gain, destination) for moving node to a neighbouring partition"""
    current = assignment[node]
    counts: Dict[int, int] = {}
    for nb in g[node]:
        counts[assignment[nb]] = counts.get(assignment[nb], 0) + 1
    internal = counts.get(current, 0)
    best_gain, best_part = 0, current
    for part in sorted(counts):
        if part == current:
            continue
        gain = counts[part] - internal
        if gain > best_gain:
            best_gain, best_part = gain, part
    return best_gain, best_part


def _boundary_moves(g: ElementGraph, assignment: Dict[int, int], sizes: List[int], cap: float) -> int:
    """One sweep of strictly improving single-element moves; returns cut reduction"""
    reduction = 0
    for node in sorted(g):
        gain, part = _move_gain(node, g, assignment)
        if gain > 0 and sizes[part] + 1 <= cap:
            sizes[assignment[node]] -= 1
            sizes[part] += 1
            assignment[node] = part
            reduction += gain
    return reduction


def _local_cut(nodes: Set[int], g: ElementGraph, assignment: Dict[int, int]) -> int:
    """Cut edges with at least one endpoint in `nodes`"""
    cut = 0
    for u in nodes:
        for v in g[u]:
            if assignment[u] != assignment[v] and (v not in nodes or u < v):
                cut += 1
    return cut


def _rebisect_pairs(g: ElementGraph, assignment: Dict[int, int], parts: int) -> int:
    """Re-split the union of each pair of adjacent partitions by graph growing,
    keeping both sizes; a split is kept only when it strictly lowers the cut"""
    reduction = 0
    pairs = sorted({tuple(sorted((assignment[u], assignment[v])))
                    for u, v in graph_edges(g) if assignment[u] != assignment[v]})
    for a, b in pairs:
        union = {e for e, p in assignment.items() if p in (a, b)}
        size_a = sum(1 for e in union if assignment[e] == a)
        before = _local_cut(union, g, assignment)
        saved = {e: assignment[e] for e in union}

        best: Optional[Tuple[int, Dict[int, int]]] = None
        for first, second in ((a, b), (b, a)):
            first_size = size_a if first == a else len(union) - size_a
            grown, rest = _bisect_graph(union, g, first_size)
            for e in grown:
                assignment[e] = first
            for e in rest:
                assignment[e] = second
            after = _local_cut(union, g, assignment)
            if best is None or after < best[0]:
                best = (after, {e: assignment[e] for e in union})
            assignment.update(saved)

        if best is not None and best[0] < before:
            assignment.update(best[1])
            reduction += before - best[0]
    return reduction


def refine(g: ElementGraph, boot: PartitionMap, target: Optional[int] = None,
           imbalance: float = DEFAULT_IMBALANCE, passes: int = DEFAULT_PASSES) -> PartitionMap:
    """Lower the edge cut of a bootstrap map without breaking the balance bound.

    Partitions are first grown to `target` by splitting the largest. Each pass
    then applies strictly improving boundary moves into partitions below
    imbalance * (elements / target), followed by pairwise re-bisection of
    adjacent partitions at unchanged sizes. Stops when a pass gains nothing.
    """
    boot.check_total(g.keys())
    target = boot.parts if target is None else target
    if target < boot.parts:
        raise InvalidPartitionCountError(
            f"refined partition count {target} is below the bootstrap count {boot.parts}")

    pm = split_largest(boot, target, g) if target > boot.parts else boot.copy()
    assignment = pm.assignment
    sizes = pm.sizes()
    cap = imbalance * len(assignment) / target

    for number in range(passes):
        gained = _boundary_moves(g, assignment, sizes, cap)
        gained += _rebisect_pairs(g, assignment, pm.parts)
        logger.debug(f"Refinement pass {number + 1}: cut reduced by {gained}")
        if gained == 0:
            break

    refined = PartitionMap(assignment, pm.parts, PartitionStage.REFINED, pm.ancestors)
    logger.info(f"Refined {len(assignment)} elements into {pm.parts} partitions")
    return refined


def bootstrap_groups(pm: PartitionMap) -> Dict[int, List[int]]:
    """Bootstrap partition -> refined partitions derived from it"""
    groups: Dict[int, List[int]] = {}
    for part in range(pm.parts):
        groups.setdefault(pm.ancestors.get(part, part), []).append(part)
    return groups


# ---------------------------------------------------------------- halos

def compute_halos(m: Mesh, pm: PartitionMap) -> HaloSpec:
    """Owned elements, required vertices and ghost vertices per partition"""
    pm.check_total(m.element_ids)
    owned: Dict[int, List[int]] = {p: [] for p in range(pm.parts)}
    required: Dict[int, Set[int]] = {p: set() for p in range(pm.parts)}
    for t in m.iter_elements():
        part = pm.assignment[t.id]
        owned[part].append(t.id)
        required[part].update(t.corners)

    users: Dict[int, int] = {}
    for part in range(pm.parts):
        for vertex_id in required[part]:
            users[vertex_id] = users.get(vertex_id, 0) + 1

    partitions = {}
    for part in range(pm.parts):
        ghosts = {v for v in required[part] if users[v] > 1}
        partitions[part] = PartitionHalo(sorted(owned[part]), required[part], ghosts)
    return HaloSpec(partitions)
