import numpy as np
import pytest

from skysample.core import TupleRecord
from skysample.storage import Relation, make_header, write_relation_batches

# pass/fail lines recorded by test_acceptance, replayed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rec(index, *values) -> TupleRecord:
    return TupleRecord(index, tuple(float(v) for v in values))


def recs(*value_rows) -> list[TupleRecord]:
    return [rec(i, *row) for i, row in enumerate(value_rows)]


def relation_from_values(path, values, tuple_bytes=None, page_bytes=None) -> Relation:
    """Write a (n, d) array as a relation file."""
    values = np.asarray(values, dtype=np.float64)
    header = make_header(len(values), values.shape[1], tuple_bytes, page_bytes)
    return write_relation_batches([values], header, path)


@pytest.fixture
def tiny_relation(tmp_path):
    vals = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0], [2.0, 2.0]])
    return relation_from_values(tmp_path / "tiny.skyr", vals)
