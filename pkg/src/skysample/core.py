"""Dominance semantics, reference skyline oracle, and the coverage error metric.

Minimization orientation throughout: a record is better where its values are
smaller. Maximization criteria are handled upstream by negating columns at
generation or ingestion time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    """Records of different dimensionality were compared."""


@dataclass(frozen=True, slots=True)
class TupleRecord:
    """A d-dimensional point plus its ordinal position in the source relation.

    Values must be finite; NaN or infinity would break the strict partial
    order that everything downstream relies on, so they are rejected here
    rather than special-cased in comparisons.
    """

    index: int
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("record needs at least one attribute")
        for v in vals:
            if not math.isfinite(v):
                raise ValueError(f"non-finite value in record {self.index}: {v!r}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)


class AlgorithmId(str, Enum):
    BNL = "bnl"
    SFS = "sfs"
    DC = "dc"
    BRUTE = "brute"


@dataclass(frozen=True)
class SkylineResult:
    """An antichain of records plus provenance about how it was computed.

    ``comparisons`` counts pairwise dominance tests; ``duration_ns`` is wall
    clock and is never part of any determinism or acceptance check.
    """

    members: tuple[TupleRecord, ...]
    algorithm_id: AlgorithmId
    comparisons: int = 0
    duration_ns: int = 0

    def __len__(self) -> int:
        return len(self.members)

    def index_set(self) -> frozenset[int]:
        return frozenset(r.index for r in self.members)

    def values_array(self) -> np.ndarray:
        if not self.members:
            return np.empty((0, 0))
        return np.array([r.values for r in self.members], dtype=np.float64)


@dataclass(frozen=True)
class ErrorReport:
    """Coverage count of an approximate skyline against a full relation.

    ``error`` is the uncovered fraction (total - dominated_count) / total.
    """

    dominated_count: int
    total: int

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("error is undefined for an empty relation")
        if not 0 <= self.dominated_count <= self.total:
            raise ValueError(
                f"dominated_count {self.dominated_count} outside [0, {self.total}]"
            )

    @property
    def error(self) -> float:
        return (self.total - self.dominated_count) / self.total


def _check_dims(a: TupleRecord, b: TupleRecord) -> None:
    if len(a.values) != len(b.values):
        raise DimensionMismatchError(
            f"records of dimension {len(a.values)} and {len(b.values)} are not comparable"
        )


def dominates(a: TupleRecord, b: TupleRecord) -> bool:
    """True iff a <= b on every attribute and a < b on at least one."""
    _check_dims(a, b)
    strict = False
    for x, y in zip(a.values, b.values):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def dominates_or_equal(a: TupleRecord, b: TupleRecord) -> bool:
    """True iff a dominates b or equals it exactly.

    Equivalent to componentwise a <= b: if no attribute of a exceeds b, the
    pair is either equal everywhere or strictly smaller somewhere.
    """
    _check_dims(a, b)
    return all(x <= y for x, y in zip(a.values, b.values))


def dominated_count(q: Iterable[TupleRecord], t_all: Sequence[TupleRecord]) -> int:
    """Number of records in t_all covered by some member of q.

    Covered means dominated-or-equal. Deliberately brute force, O(|q| * n):
    this is the reference oracle the vectorized and page-streamed counters
    are tested against.
    """
    members = list(q)
    if not members:
        return 0
    count = 0
    for t in t_all:
        for mem in members:
            if dominates_or_equal(mem, t):
                count += 1
                break
    return count


def true_error(approx: Iterable[TupleRecord], t_all: Sequence[TupleRecord]) -> ErrorReport:
    """Uncovered fraction of t_all under the candidate skyline ``approx``.

    The exact skyline covers everything, so its report has error 0 and any
    candidate's error is the fraction of records no member reaches.
    """
    records = list(t_all)
    if not records:
        raise ValueError("error is undefined for an empty relation")
    covered = dominated_count(approx, records)
    return ErrorReport(dominated_count=covered, total=len(records))


def value_matrix(records: Sequence[TupleRecord]) -> np.ndarray:
    """(n, d) float64 matrix of record values; rejects mixed dimensionality."""
    if not records:
        return np.empty((0, 0))
    d = len(records[0].values)
    for r in records:
        if len(r.values) != d:
            raise DimensionMismatchError("records have mixed dimensionality")
    return np.array([r.values for r in records], dtype=np.float64)


def covered_mask(values: np.ndarray, member_values: np.ndarray, block: int = 128) -> np.ndarray:
    """Vectorized coverage: out[i] iff some member row is <= values[i] componentwise.

    Member rows are processed in blocks to bound the broadcast temporary.
    """
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(len(values), dtype=bool)
    if member_values is None or len(member_values) == 0:
        return out
    members = np.asarray(member_values, dtype=np.float64)
    for lo in range(0, len(members), block):
        q = members[lo : lo + block]
        out |= (values[:, None, :] >= q[None, :, :]).all(axis=2).any(axis=1)
        if out.all():
            break
    return out


def brute_force_skyline(t_all: Sequence[TupleRecord]) -> SkylineResult:
    """All records not strictly dominated by any other record.

    Compares every pair (row-vectorized), so it is O(n^2) regardless of the
    data; duplicates of an undominated value are all retained. Serves as the
    correctness oracle for the real engines.
    """
    records = list(t_all)
    t0 = time.perf_counter_ns()
    if not records:
        return SkylineResult((), AlgorithmId.BRUTE, 0, time.perf_counter_ns() - t0)
    arr = value_matrix(records)
    keep = []
    comparisons = 0
    for i in range(len(records)):
        comparisons += len(records)
        dominated = ((arr <= arr[i]).all(axis=1) & (arr < arr[i]).any(axis=1)).any()
        if not dominated:
            keep.append(records[i])
    return SkylineResult(
        members=tuple(keep),
        algorithm_id=AlgorithmId.BRUTE,
        comparisons=comparisons,
        duration_ns=time.perf_counter_ns() - t0,
    )


def is_antichain(q: Iterable[TupleRecord]) -> bool:
    """True iff no member strictly dominates another."""
    members = list(q)
    for i, a in enumerate(members):
        for b in members[i + 1 :]:
            if dominates(a, b) or dominates(b, a):
                return False
    return True
