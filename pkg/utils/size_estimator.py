"""
Solution Size Estimator
Estimates the storage a solver run produces so gather staging can be planned
"""

import datetime
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from core.errors import InvalidQueryError

DOUBLE_BYTES = 8
# Fixed-width row sizes of the stored mesh tables
VERTEX_ROW_BYTES = 8 + 3 * DOUBLE_BYTES
ELEMENT_ROW_BYTES = 8 + 4 * 8


@dataclass(frozen=True)
class SolutionSizeQuery:
    """N elements, S state variables per Gauss point, G Gauss points per element, T time samples"""
    elements: int
    states: int
    gauss_points: int
    samples: int

    def __post_init__(self):
        for name in ("elements", "states", "gauss_points", "samples"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise InvalidQueryError(f"{name} must be a non-negative integer, got {value!r}")


def estimate_solution_size(q: SolutionSizeQuery) -> int:
    """T*N*S*G doubles, in bytes"""
    return q.samples * q.elements * q.states * q.gauss_points * DOUBLE_BYTES


def human_bytes(size: float) -> str:
    for unit in ("B", "KB", "MB", "GB", "TB"):
        if size < 1000:
            return f"{size:.0f} {unit}" if unit == "B" else f"{size:.2f} {unit}"
        size /= 1000.0
    return f"{size:.2f} PB"


class SizeEstimator:
    """Estimates solution output and mesh table sizes"""

    def estimate(self, q: SolutionSizeQuery, vertices: Optional[int] = None) -> Dict[str, Any]:
        """
        Estimate the storage for one solver run

        Args:
            q: Solution dimensions
            vertices: Vertex count, when the mesh table size should be included

        Returns:
            Dictionary with estimation results
        """
        total = estimate_solution_size(q)
        per_element = q.states * q.gauss_points * DOUBLE_BYTES
        estimate: Dict[str, Any] = {
            'query': q,
            'bytes': total,
            'bytes_per_element_sample': per_element,
            'bytes_per_sample': per_element * q.elements,
            'element_table_bytes': q.elements * ELEMENT_ROW_BYTES,
        }
        if vertices is not None:
            estimate['vertex_table_bytes'] = vertices * VERTEX_ROW_BYTES
        return estimate

    def report_lines(self, estimate: Dict[str, Any]) -> List[str]:
        """key=value lines for the command line"""
        q = estimate['query']
        lines = [
            f"bytes={estimate['bytes']}",
            f"N={q.elements} S={q.states} G={q.gauss_points} T={q.samples}",
            f"bytes_per_element_sample={estimate['bytes_per_element_sample']}",
            f"bytes_per_sample={estimate['bytes_per_sample']}",
            f"element_table_bytes={estimate['element_table_bytes']}",
        ]
        if 'vertex_table_bytes' in estimate:
            lines.append(f"vertex_table_bytes={estimate['vertex_table_bytes']}")
        return lines

    def generate_estimate_report(self, estimate: Dict[str, Any]) -> str:
        """Generate a readable text report from estimation results"""
        q = estimate['query']
        current_time = datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')

        report = f"""
SOLUTION SIZE ESTIMATION REPORT
{'=' * 60}

RUN DIMENSIONS:
  Elements (N): {q.elements:,}
  State variables per Gauss point (S): {q.states:,}
  Gauss points per element (G): {q.gauss_points:,}
  Time samples (T): {q.samples:,}
  Analysis Date: {current_time}

OUTPUT SIZE:
  Per element and sample: {estimate['bytes_per_element_sample']:,} bytes
  Per time sample: {human_bytes(estimate['bytes_per_sample'])}
  Total: {estimate['bytes']:,} bytes ({human_bytes(estimate['bytes'])})

MESH TABLES:
  Element table: {human_bytes(estimate['element_table_bytes'])}
"""
        if 'vertex_table_bytes' in estimate:
            report += f"  Vertex table: {human_bytes(estimate['vertex_table_bytes'])}\n"

        report += """
NOTES:
• The total is a lower bound: N*S*G doubles per time sample
• Index, staging and per-row overheads come on top
"""
        return report
