"""Exact skyline engines over record streams, plus antichain merging.

All engines produce the same member set as the pairwise reference oracle
(by record index); they differ only in access pattern and cost profile.
Members are returned sorted by index so results compare directly.
"""

from __future__ import annotations

import struct
import tempfile
import time
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import (
    AlgorithmId,
    DimensionMismatchError,
    SkylineResult,
    TupleRecord,
    brute_force_skyline,
    value_matrix,
)

DEFAULT_WINDOW_CAPACITY = 1024
_DC_LEAF = 16


def _dom(a: Sequence[float], b: Sequence[float]) -> bool:
    # raw-tuple strict dominance, early exit on the first losing attribute
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def _sorted_result(members, algorithm_id, comparisons, t0) -> SkylineResult:
    ordered = tuple(sorted(members, key=lambda r: r.index))
    return SkylineResult(
        members=ordered,
        algorithm_id=algorithm_id,
        comparisons=comparisons,
        duration_ns=time.perf_counter_ns() - t0,
    )


class _SpillFile:
    """Temporary overflow store for window-evicted records."""

    def __init__(self, d: int):
        self._codec = struct.Struct(f"<q{d}d")
        self._file = tempfile.TemporaryFile(prefix="skysample-bnl-")

    def append(self, record: TupleRecord) -> None:
        self._file.write(self._codec.pack(record.index, *record.values))

    def replay(self) -> Iterator[TupleRecord]:
        self._file.seek(0)
        size = self._codec.size
        while True:
            raw = self._file.read(size)
            if not raw:
                break
            unpacked = self._codec.unpack(raw)
            yield TupleRecord(unpacked[0], tuple(unpacked[1:]))

    def close(self) -> None:
        self._file.close()


def bnl_skyline(input: Iterable[TupleRecord], window_capacity: int) -> SkylineResult:
    """Block-nested-loops skyline with a bounded in-memory window.

    Records that are neither dominated nor placeable in a full window spill
    to a temporary file and are resolved in later passes. A window record is
    final at end of pass only if it entered before the first spill: every
    later arrival has then been compared against it. The member set is
    independent of window_capacity.
    """
    if window_capacity < 1:
        raise ValueError("window_capacity must be at least 1")
    t0 = time.perf_counter_ns()
    confirmed: list[TupleRecord] = []
    comparisons = 0
    dim: int | None = None

    pending: Iterable[TupleRecord] = input
    while True:
        window: list[tuple[TupleRecord, int]] = []  # (record, arrival)
        spill: _SpillFile | None = None
        first_spill_arrival: int | None = None
        arrival = 0
        for p in pending:
            if dim is None:
                dim = len(p.values)
            elif len(p.values) != dim:
                raise DimensionMismatchError("records have mixed dimensionality")
            arrival += 1
            survivors: list[tuple[TupleRecord, int]] = []
            alive = True
            for k, entry in enumerate(window):
                comparisons += 1
                if _dom(entry[0].values, p.values):
                    alive = False
                    survivors.extend(window[k:])
                    break
                comparisons += 1
                if not _dom(p.values, entry[0].values):
                    survivors.append(entry)
            window = survivors
            if not alive:
                continue
            if len(window) < window_capacity:
                window.append((p, arrival))
            else:
                if spill is None:
                    spill = _SpillFile(dim)
                    first_spill_arrival = arrival
                spill.append(p)

        if spill is None:
            confirmed.extend(rec for rec, _ in window)
            break
        confirmed.extend(rec for rec, arr in window if arr < first_spill_arrival)
        carry = [rec for rec, arr in window if arr >= first_spill_arrival]

        def next_pass(spill=spill, carry=carry):
            yield from spill.replay()
            spill.close()
            yield from carry

        pending = next_pass()

    return _sorted_result(confirmed, AlgorithmId.BNL, comparisons, t0)


def sfs_skyline(input: Iterable[TupleRecord]) -> SkylineResult:
    """Sort-filter skyline: order by coordinate sum, then one filter pass.

    The sum is strictly increased by dominance, so a record can only be
    dominated by one that sorts before it; ties in the sum are ordered by
    index for determinism (equal-sum records are never comparable).
    """
    records = list(input)
    t0 = time.perf_counter_ns()
    if not records:
        return SkylineResult((), AlgorithmId.SFS, 0, time.perf_counter_ns() - t0)
    arr = value_matrix(records)
    order = np.lexsort((np.arange(len(records)), arr.sum(axis=1)))
    sky_vals = np.empty_like(arr)
    keep: list[TupleRecord] = []
    comparisons = 0
    k = 0
    for pos in order.tolist():
        x = arr[pos]
        if k:
            comparisons += k
            head = sky_vals[:k]
            if ((head <= x).all(axis=1) & (head < x).any(axis=1)).any():
                continue
            if __debug__:
                assert not ((x <= head).all(axis=1) & (x < head).any(axis=1)).any(), \
                    "sort order violated: candidate dominates an accepted record"
        sky_vals[k] = x
        k += 1
        keep.append(records[pos])
    return _sorted_result(keep, AlgorithmId.SFS, comparisons, t0)


def _filter_skyline(records: list[TupleRecord]) -> tuple[list[TupleRecord], int]:
    # quadratic in-memory skyline for small blocks
    kept: list[TupleRecord] = []
    comparisons = 0
    for p in records:
        dead = False
        survivors = []
        for q in kept:
            comparisons += 1
            if _dom(q.values, p.values):
                dead = True
                survivors = kept
                break
            comparisons += 1
            if not _dom(p.values, q.values):
                survivors.append(q)
        kept = survivors
        if not dead:
            kept.append(p)
    return kept, comparisons


def _merge_members(a: list[TupleRecord], b: list[TupleRecord]) -> tuple[list[TupleRecord], int]:
    comparisons = 0

    def survivors(side: list[TupleRecord], other: list[TupleRecord]) -> list[TupleRecord]:
        nonlocal comparisons
        kept = []
        for r in side:
            dominated = False
            for q in other:
                comparisons += 1
                if _dom(q.values, r.values):
                    dominated = True
                    break
            if not dominated:
                kept.append(r)
        return kept

    return survivors(a, b) + survivors(b, a), comparisons


def dc_skyline(records: Sequence[TupleRecord]) -> SkylineResult:
    """Divide-and-conquer skyline: halve, recurse, combine by pairwise merge."""
    records = list(records)
    t0 = time.perf_counter_ns()
    if records:
        value_matrix(records)  # dimensionality check up front

    def rec(block: list[TupleRecord]) -> tuple[list[TupleRecord], int]:
        if len(block) <= _DC_LEAF:
            return _filter_skyline(block)
        mid = len(block) // 2
        left, cl = rec(block[:mid])
        right, cr = rec(block[mid:])
        merged, cm = _merge_members(left, right)
        return merged, cl + cr + cm

    members, comparisons = rec(records)
    return _sorted_result(members, AlgorithmId.DC, comparisons, t0)


def merge_skyline(a: SkylineResult, b: SkylineResult) -> SkylineResult:
    """Skyline of the multiset union of two antichains.

    Keeps members of each side not strictly dominated by the other side;
    equal values surviving on both sides are all retained.
    """
    t0 = time.perf_counter_ns()
    if a.members and b.members and a.members[0].dim != b.members[0].dim:
        raise DimensionMismatchError("cannot merge skylines of different dimensionality")
    members, comparisons = _merge_members(list(a.members), list(b.members))
    ordered = tuple(sorted(members, key=lambda r: r.index))
    return SkylineResult(
        members=ordered,
        algorithm_id=a.algorithm_id,
        comparisons=a.comparisons + b.comparisons + comparisons,
        duration_ns=a.duration_ns + b.duration_ns + (time.perf_counter_ns() - t0),
    )


def compute_skyline(records: Iterable[TupleRecord], engine: AlgorithmId,
                    window_capacity: int = DEFAULT_WINDOW_CAPACITY) -> SkylineResult:
    """Dispatch to the requested engine."""
    engine = AlgorithmId(engine)
    if engine is AlgorithmId.BNL:
        return bnl_skyline(records, window_capacity)
    if engine is AlgorithmId.SFS:
        return sfs_skyline(records)
    if engine is AlgorithmId.DC:
        return dc_skyline(list(records))
    if engine is AlgorithmId.BRUTE:
        return brute_force_skyline(list(records))
    raise ValueError(f"unknown engine {engine!r}")
