"""Page-organized relation files with logical I/O accounting.

On-disk layout (all little-endian):

    page 0         header: magic ``SKYR``, version u32, n u64, d u32,
                   tuple_bytes u32, page_bytes u32, zero padding to page end
    pages 1..P     ``page_bytes // tuple_bytes`` records per page; each record
                   is d float64 values zero-padded to tuple_bytes; records
                   never straddle a page boundary; trailing space in the last
                   page is zero-padded

Counters are logical: pages_read / pages_written count page-granular accesses
made through this module, not physical device traffic.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import TupleRecord
from .rng import make_rng

MAGIC = b"SKYR"
FORMAT_VERSION = 1
DEFAULT_TUPLE_BYTES = 128
DEFAULT_PAGE_BYTES = 8192
PAGE_BYTES_ENV = "SKYSAMPLE_PAGE_BYTES"

_HEADER = struct.Struct("<4sIQIII")  # magic, version, n, d, tuple_bytes, page_bytes


class IntegrityError(Exception):
    """Input bytes do not form valid relation data."""


class RelationFormatError(IntegrityError):
    """File is not a valid relation (bad magic, bad header, truncated)."""


class CsvIngestError(IntegrityError):
    """CSV input could not be converted to a relation."""


def default_page_bytes() -> int:
    """Page size used when none is given; SKYSAMPLE_PAGE_BYTES overrides."""
    raw = os.environ.get(PAGE_BYTES_ENV)
    if raw is None:
        return DEFAULT_PAGE_BYTES
    value = int(raw)
    if value < 64:
        raise ValueError(f"{PAGE_BYTES_ENV}={value} is too small to hold a record")
    return value


@dataclass(frozen=True)
class RelationHeader:
    n: int
    d: int
    tuple_bytes: int
    page_bytes: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.tuple_bytes < 8 * self.d:
            raise ValueError(
                f"tuple_bytes {self.tuple_bytes} cannot hold {self.d} float64 values"
            )
        if self.page_bytes < self.tuple_bytes:
            raise ValueError("page_bytes must hold at least one record")

    @property
    def records_per_page(self) -> int:
        return self.page_bytes // self.tuple_bytes

    @property
    def payload_bytes(self) -> int:
        return self.records_per_page * self.tuple_bytes

    @property
    def data_pages(self) -> int:
        return math.ceil(self.n / self.records_per_page) if self.n else 0

    @property
    def file_bytes(self) -> int:
        return (1 + self.data_pages) * self.page_bytes

    def pack(self) -> bytes:
        head = _HEADER.pack(
            MAGIC, self.format_version, self.n, self.d, self.tuple_bytes, self.page_bytes
        )
        return head + b"\x00" * (self.page_bytes - len(head))

    @classmethod
    def unpack(cls, raw: bytes) -> "RelationHeader":
        if len(raw) < _HEADER.size:
            raise RelationFormatError("file too short for a relation header")
        magic, version, n, d, tuple_bytes, page_bytes = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise RelationFormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise RelationFormatError(f"unsupported format version {version}")
        try:
            return cls(n=n, d=d, tuple_bytes=tuple_bytes, page_bytes=page_bytes,
                       format_version=version)
        except ValueError as exc:
            raise RelationFormatError(f"inconsistent header: {exc}") from exc


def make_header(n: int, d: int, tuple_bytes: int | None = None,
                page_bytes: int | None = None) -> RelationHeader:
    """Header with defaults: 128-byte strides (wider if d needs it), 8 KiB pages."""
    if tuple_bytes is None:
        tuple_bytes = max(DEFAULT_TUPLE_BYTES, 8 * d)
    if page_bytes is None:
        page_bytes = default_page_bytes()
    return RelationHeader(n=n, d=d, tuple_bytes=tuple_bytes, page_bytes=page_bytes)


@dataclass
class IoCounter:
    """Monotone page-level access counters; each reader owns its own."""

    pages_read: int = 0
    pages_written: int = 0
    seeks: int = 0


@dataclass(frozen=True)
class Relation:
    """An openable relation file: path plus its validated header."""

    path: Path
    header: RelationHeader

    @classmethod
    def open(cls, path: str | Path) -> "Relation":
        path = Path(path)
        with open(path, "rb") as f:
            raw = f.read(_HEADER.size)
        header = RelationHeader.unpack(raw)
        actual = path.stat().st_size
        if actual != header.file_bytes:
            raise RelationFormatError(
                f"file is {actual} bytes, header implies {header.file_bytes}"
            )
        return cls(path=path, header=header)

    @property
    def n(self) -> int:
        return self.header.n

    @property
    def d(self) -> int:
        return self.header.d


@dataclass(frozen=True)
class Sample:
    """A without-replacement sample: records, their source indices, draw seed."""

    records: tuple[TupleRecord, ...]
    source_indices: tuple[int, ...]
    seed: int
    replacement: bool = False

    def __post_init__(self):
        if len(self.records) != len(self.source_indices):
            raise ValueError("records and source_indices differ in length")
        for a, b in zip(self.source_indices, self.source_indices[1:]):
            if b <= a:
                raise ValueError("source indices must be strictly increasing")
        if self.replacement:
            raise ValueError("only without-replacement samples are supported")

    def values(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, 0))
        return np.array([r.values for r in self.records], dtype=np.float64)


def _pack_pages(values: np.ndarray, header: RelationHeader) -> bytes:
    """Pack a (k, d) value block into whole pages, zero-padding strides and tails."""
    rpp = header.records_per_page
    k = len(values)
    npages = math.ceil(k / rpp)
    rec = np.zeros((npages * rpp, header.tuple_bytes), dtype=np.uint8)
    raw = np.ascontiguousarray(values, dtype="<f8").view(np.uint8).reshape(k, 8 * header.d)
    rec[:k, : 8 * header.d] = raw
    pages = np.zeros((npages, header.page_bytes), dtype=np.uint8)
    pages[:, : header.payload_bytes] = rec.reshape(npages, rpp * header.tuple_bytes)
    return pages.tobytes()


def _unpack_pages(raw: bytes, header: RelationHeader) -> np.ndarray:
    """Inverse of _pack_pages: page bytes to a (pages * rpp, d) value block."""
    npages = len(raw) // header.page_bytes
    buf = np.frombuffer(raw, dtype=np.uint8).reshape(npages, header.page_bytes)
    rec = buf[:, : header.payload_bytes].reshape(-1, header.tuple_bytes)
    vals = np.ascontiguousarray(rec[:, : 8 * header.d]).view("<f8")
    return vals.reshape(-1, header.d)


class _PageStreamWriter:
    """Accumulates value blocks and flushes them as page-aligned writes."""

    def __init__(self, f, header: RelationHeader, counter: IoCounter | None = None,
                 buffer_pages: int = 256):
        self._f = f
        self._header = header
        self._counter = counter
        self._pending: list[np.ndarray] = []
        self._pending_rows = 0
        self._flush_rows = header.records_per_page * buffer_pages
        self.rows_written = 0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self._header.d:
            raise ValueError(f"expected (k, {self._header.d}) value block")
        if not np.isfinite(values).all():
            raise ValueError("non-finite value in record stream")
        self._pending.append(values)
        self._pending_rows += len(values)
        while self._pending_rows >= self._flush_rows:
            self._flush(self._flush_rows)

    def _flush(self, rows: int) -> None:
        block = np.concatenate(self._pending) if len(self._pending) > 1 else self._pending[0]
        head, tail = block[:rows], block[rows:]
        self._pending = [tail] if len(tail) else []
        self._pending_rows = len(tail)
        payload = _pack_pages(head, self._header)
        self._f.write(payload)
        self.rows_written += len(head)
        if self._counter:
            self._counter.pages_written += len(payload) // self._header.page_bytes

    def close(self) -> int:
        if self._pending_rows:
            self._flush(self._pending_rows)
        return self.rows_written


def write_relation_batches(batches: Iterable[np.ndarray], header: RelationHeader,
                           path: str | Path, counter: IoCounter | None = None) -> Relation:
    """Write a relation from (k, d) value blocks; block sizes are arbitrary."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(header.pack())
        if counter:
            counter.pages_written += 1
        writer = _PageStreamWriter(f, header, counter)
        for block in batches:
            writer.add(block)
        written = writer.close()
    if written != header.n:
        path.unlink(missing_ok=True)
        raise ValueError(f"stream yielded {written} records, header says n={header.n}")
    return Relation(path=path, header=header)


def write_relation(records: Iterable[TupleRecord], header: RelationHeader,
                   path: str | Path, counter: IoCounter | None = None) -> Relation:
    """Write a relation from a record stream (indices are implied by order)."""

    def batches():
        chunk: list[tuple[float, ...]] = []
        for r in records:
            if len(r.values) != header.d:
                raise ValueError(
                    f"record {r.index} has dimension {len(r.values)}, header says d={header.d}"
                )
            chunk.append(r.values)
            if len(chunk) >= 65536:
                yield np.array(chunk, dtype=np.float64)
                chunk = []
        if chunk:
            yield np.array(chunk, dtype=np.float64)

    return write_relation_batches(batches(), header, path, counter)


def scan_batches(rel: Relation, counter: IoCounter | None = None,
                 pages_per_batch: int = 256) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start_index, values) blocks in index order via sequential page reads.

    On full consumption pages_read grows by exactly the relation's data page
    count; an abandoned iterator only counts the pages it actually read.
    """
    h = rel.header
    if h.n == 0:
        return
    with open(rel.path, "rb") as f:
        f.seek(h.page_bytes)
        if counter:
            counter.seeks += 1
        page = 0
        start = 0
        while page < h.data_pages:
            k = min(pages_per_batch, h.data_pages - page)
            raw = f.read(k * h.page_bytes)
            if len(raw) != k * h.page_bytes:
                raise RelationFormatError("truncated data region")
            if counter:
                counter.pages_read += k
            vals = _unpack_pages(raw, h)
            take = min(h.n - start, len(vals))
            yield start, vals[:take]
            start += take
            page += k


def scan(rel: Relation, counter: IoCounter | None = None) -> Iterator[TupleRecord]:
    """Yield TupleRecords in index order."""
    for start, vals in scan_batches(rel, counter):
        for i, row in enumerate(vals):
            yield TupleRecord(start + i, tuple(row))


def fetch_values(rel: Relation, indices: Sequence[int] | np.ndarray,
                 counter: IoCounter | None = None) -> np.ndarray:
    """Gather record values for ascending indices, reading each touched page once.

    Consecutive pages are read in single runs; seeks counts the runs.
    """
    h = rel.header
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return np.empty((0, h.d))
    if idx[0] < 0 or idx[-1] >= h.n:
        raise ValueError("record index out of range")
    pages = idx // h.records_per_page
    slots = idx % h.records_per_page
    uniq = np.unique(pages)
    out = np.empty((idx.size, h.d))
    breaks = np.flatnonzero(np.diff(uniq) > 1) + 1
    run_starts = np.concatenate(([0], breaks))
    run_ends = np.concatenate((breaks, [len(uniq)]))
    with open(rel.path, "rb") as f:
        for s, e in zip(run_starts, run_ends):
            first, last = int(uniq[s]), int(uniq[e - 1])
            f.seek((1 + first) * h.page_bytes)
            raw = f.read((last - first + 1) * h.page_bytes)
            if len(raw) != (last - first + 1) * h.page_bytes:
                raise RelationFormatError("truncated data region")
            vals = _unpack_pages(raw, h)
            mask = (pages >= first) & (pages <= last)
            local = (pages[mask] - first) * h.records_per_page + slots[mask]
            out[mask] = vals[local]
    if counter:
        counter.pages_read += len(uniq)
        counter.seeks += len(run_starts)
    return out


def floyd_indices(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Uniform m-subset of {0..n-1} by Floyd's subset-sampling algorithm, sorted."""
    if m == 0:
        return np.empty(0, dtype=np.int64)
    lows = np.arange(n - m, n, dtype=np.int64)
    draws = rng.integers(0, lows + 1)  # draw t_j uniform on [0, j]
    chosen: set[int] = set()
    for j, t in zip(lows.tolist(), draws.tolist()):
        chosen.add(j if t in chosen else t)
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=len(chosen)))


def sample_without_replacement(rel: Relation, m: int, seed: int,
                               counter: IoCounter | None = None) -> Sample:
    """Uniform without-replacement sample of m records, fetched in page order."""
    n = rel.header.n
    if not 0 <= m <= n:
        raise ValueError(f"sample size {m} outside [0, {n}]")
    rng = make_rng(seed)
    idx = floyd_indices(rng, n, m)
    vals = fetch_values(rel, idx, counter)
    records = tuple(
        TupleRecord(int(i), tuple(row)) for i, row in zip(idx.tolist(), vals)
    )
    return Sample(records=records, source_indices=tuple(idx.tolist()), seed=seed)


def ingest_csv(csv_path: str | Path, out_path: str | Path,
               columns: Sequence[int] | None = None,
               negate: Sequence[bool] | None = None,
               has_header: bool = False,
               tuple_bytes: int | None = None,
               page_bytes: int | None = None,
               counter: IoCounter | None = None) -> Relation:
    """Convert a CSV file to a relation.

    ``columns`` selects (0-based) numeric columns, default all; ``negate``
    flips the sign of the matching selected column, turning a maximization
    criterion into the minimization orientation used everywhere here.
    The record count is unknown up front, so the header is patched after the
    data pages are streamed out.
    """
    csv_path, out_path = Path(csv_path), Path(out_path)
    header: RelationHeader | None = None
    writer: _PageStreamWriter | None = None
    sign: np.ndarray | None = None
    width: int | None = None

    with open(csv_path, newline="", encoding="utf-8") as src, open(out_path, "wb") as dst:
        rows = csv.reader(src)
        chunk: list[list[float]] = []
        for row_no, row in enumerate(rows):
            if row_no == 0 and has_header:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
                cols = list(columns) if columns is not None else list(range(width))
                if not cols or any(c < 0 or c >= width for c in cols):
                    raise CsvIngestError(f"column selection {cols} invalid for width {width}")
                if negate is not None and len(negate) != len(cols):
                    raise CsvIngestError("negate flags must match selected columns")
                sign = np.where(np.array(negate, dtype=bool), -1.0, 1.0) if negate is not None else None
                header = make_header(0, len(cols), tuple_bytes, page_bytes)
                dst.write(header.pack())
                if counter:
                    counter.pages_written += 1
                writer = _PageStreamWriter(dst, header, counter)
            if len(row) != width:
                raise CsvIngestError(
                    f"row {row_no}: expected {width} columns, found {len(row)}"
                )
            try:
                parsed = [float(row[c]) for c in cols]
            except ValueError as exc:
                raise CsvIngestError(f"row {row_no}: {exc}") from exc
            if not all(math.isfinite(v) for v in parsed):
                raise CsvIngestError(f"row {row_no}: non-finite value")
            chunk.append(parsed)
            if len(chunk) >= 65536:
                writer.add(_signed(chunk, sign))
                chunk = []
        if writer is None:
            raise CsvIngestError("CSV file has no data rows")
        if chunk:
            writer.add(_signed(chunk, sign))
        n = writer.close()

    final = RelationHeader(n=n, d=header.d, tuple_bytes=header.tuple_bytes,
                           page_bytes=header.page_bytes)
    with open(out_path, "r+b") as f:
        f.write(final.pack())
    return Relation(path=out_path, header=final)


def _signed(chunk: list[list[float]], sign: np.ndarray | None) -> np.ndarray:
    arr = np.array(chunk, dtype=np.float64)
    return arr * sign if sign is not None else arr
