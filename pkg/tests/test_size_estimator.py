import pytest

from core.errors import InvalidQueryError
from utils.size_estimator import SizeEstimator, SolutionSizeQuery, estimate_solution_size, human_bytes


@pytest.mark.parametrize("n, s, g, t, expected", [
    (1, 12, 11, 1, 1056),
    (1000, 12, 11, 10, 10_560_000),
    (1000, 12, 11, 0, 0),
    (0, 12, 11, 5, 0),
])
def test_solution_size(n, s, g, t, expected):
    assert estimate_solution_size(SolutionSizeQuery(n, s, g, t)) == expected


def test_size_is_multiplicative():
    base = estimate_solution_size(SolutionSizeQuery(7, 3, 4, 5))
    assert estimate_solution_size(SolutionSizeQuery(14, 3, 4, 5)) == 2 * base
    assert estimate_solution_size(SolutionSizeQuery(7, 6, 4, 5)) == 2 * base
    assert estimate_solution_size(SolutionSizeQuery(7, 3, 8, 5)) == 2 * base
    assert estimate_solution_size(SolutionSizeQuery(7, 3, 4, 10)) == 2 * base


@pytest.mark.parametrize("fields", [(-1, 12, 11, 1), (1, 12, 11, -3), (1.5, 12, 11, 1), (True, 12, 11, 1)])
def test_rejects_bad_dimensions(fields):
    with pytest.raises(InvalidQueryError):
        SolutionSizeQuery(*fields)


def test_estimate_report():
    estimator = SizeEstimator()
    estimate = estimator.estimate(SolutionSizeQuery(1000, 12, 11, 10), vertices=500)
    assert estimate['bytes'] == 10_560_000
    assert estimate['bytes_per_element_sample'] == 1056
    assert estimate['bytes_per_sample'] == 1_056_000
    assert estimator.report_lines(estimate)[0] == "bytes=10560000"
    assert "vertex_table_bytes=" in estimator.report_lines(estimate)[-1]

    report = estimator.generate_estimate_report(estimate)
    assert "SOLUTION SIZE ESTIMATION REPORT" in report
    assert "10,560,000 bytes (10.56 MB)" in report


def test_human_bytes():
    assert human_bytes(999) == "999 B"
    assert human_bytes(1056) == "1.06 KB"
    assert human_bytes(2.5e15) == "2.50 PB"
