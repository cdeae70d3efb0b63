"""Sampling-based approximate skyline computation.

Two strategies over a disk relation:

* ``baseline`` — skyline of one uniform without-replacement sample of fixed
  size m. Its expected uncovered fraction has a closed form under attribute
  independence, implemented by ``predict_error``.
* ``double`` — adaptive loop: start from a small sample, estimate the
  uncovered fraction of the current answer with a fresh Monte-Carlo
  verification sample, and double the sample until the estimate drops to
  2/3 of the target bound. With verification size
  ceil(18 (ln log2 n + ln(1/delta)) / epsilon) the returned answer leaves
  more than an epsilon fraction uncovered with probability at most delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .algorithms import DEFAULT_WINDOW_CAPACITY, compute_skyline, merge_skyline
from .core import AlgorithmId, SkylineResult, TupleRecord, covered_mask
from .rng import derive_seed, make_rng
from .storage import (
    IoCounter,
    Relation,
    fetch_values,
    sample_without_replacement,
    scan,
)

EULER_GAMMA = 0.5772156649
HARMONIC_EXACT_LIMIT = 10_000_000

REASON_CONVERGED = "converged"
REASON_EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class ApproxParams:
    """Inputs of the doubling loop.

    ``s_initial`` is the first sample size; any positive integer works, and
    None means "use the verification sample size", the convention used for
    every benchmark here. ``engine`` picks the exact-skyline subroutine.
    """

    epsilon: float
    delta: float
    s_initial: int | None = None
    engine: AlgorithmId = AlgorithmId.SFS
    window_capacity: int = DEFAULT_WINDOW_CAPACITY

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.s_initial is not None and self.s_initial < 1:
            raise ValueError("s_initial must be a positive integer")


@dataclass(frozen=True)
class RoundLog:
    """One verification round: sample size, answer size, error estimate.

    ``pages_read`` is the invocation's cumulative page count at the end of
    the round. An exhausted final round records s_v = 0 and eps_hat = 0.0
    (the answer is exact, no verification is drawn).
    """

    round: int
    m: int
    skyline_size: int
    eps_hat: float
    s_v: int
    pages_read: int


@dataclass(frozen=True)
class DoubleTrace:
    rounds: tuple[RoundLog, ...]
    final_m: int
    terminated: bool
    reason: str

    def round_records(self) -> list[dict]:
        """Per-round dicts with stable field names, ready for JSON lines."""
        return [
            {
                "round": r.round,
                "m": r.m,
                "skyline_size": r.skyline_size,
                "eps_hat": r.eps_hat,
                "s_v": r.s_v,
                "pages_read": r.pages_read,
            }
            for r in self.rounds
        ]


@dataclass(frozen=True)
class ErrorPrediction:
    """Closed-form expected uncovered fraction for a size-m sample skyline."""

    d: int
    m: int
    n: int
    predicted_mean: float
    bound_sum: float


def harmonic(k: int, n: int) -> float:
    """k-th order harmonic number H(k, n).

    H(0, n) = 1 and H(k, n) = sum_{i<=n} H(k-1, i) / i, evaluated exactly by
    cumulative sums for n up to 10^7. Beyond that the two-term expansion
    (ln n)^k / k! + gamma (ln n)^(k-1) / (k-1)! is used; its relative error
    is below 1% already at k=2, n=10^6 and shrinks as n grows.
    """
    if k < 0:
        raise ValueError("order must be non-negative")
    if n < 1:
        raise ValueError("n must be positive")
    if k == 0:
        return 1.0
    if n <= HARMONIC_EXACT_LIMIT:
        inv = 1.0 / np.arange(1, n + 1)
        h = np.ones(n)
        for _ in range(k):
            h = np.cumsum(h * inv)
        return float(h[-1])
    ln = math.log(n)
    return ln**k / math.factorial(k) + EULER_GAMMA * ln ** (k - 1) / math.factorial(k - 1)


def required_verification_size(n: int, epsilon: float, delta: float) -> int:
    """Verification sample size ceil(18 (ln log2 n + ln(1/delta)) / epsilon)."""
    if n < 2:
        raise ValueError("relation must have at least 2 records")
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    return math.ceil(18.0 * (math.log(math.log2(n)) + math.log(1.0 / delta)) / epsilon)


def predict_error(d: int, m: int, n: int) -> ErrorPrediction:
    """Expected uncovered fraction of a size-m sample skyline under
    attribute independence: (n-m) / (n (m+1)) * H(d-1, m+1).

    ``bound_sum`` replaces the harmonic number with its elementary upper
    bound sum_{i<d} (ln(m+1))^i / i!.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if not 1 <= m < n:
        raise ValueError("expected 1 <= m < n")
    scale = (n - m) / (n * (m + 1))
    mean = min(1.0, scale * harmonic(d - 1, m + 1))
    log_m1 = math.log(m + 1)
    bound = min(1.0, scale * sum(log_m1**i / math.factorial(i) for i in range(d)))
    return ErrorPrediction(d=d, m=m, n=n, predicted_mean=mean, bound_sum=bound)


def estimate_error_from_sample(sample_skyline_size: int, m: int, n: int) -> float:
    """Distribution-free error estimate (n-m)/n * skyline_size/m.

    Uses the sample's own skyline proportion in place of the unknown
    expected-skyline term, so it needs no independence assumption.
    """
    if m < 1:
        raise ValueError("sample size must be positive")
    if not 0 <= sample_skyline_size <= m:
        raise ValueError("skyline size outside [0, m]")
    return (n - m) / n * (sample_skyline_size / m)


def rank_transform(records: Iterable[TupleRecord]) -> list[TupleRecord]:
    """Per attribute, replace values by rank/n (ranks 0..n-1).

    On attribute-distinct input this preserves every strict-dominance pair
    while mapping the data onto the uniform grid. Ties are ranked by input
    position (stable), which can create dominance between previously
    incomparable records; callers wanting exactness must deduplicate first.
    """
    recs = list(records)
    if not recs:
        return []
    arr = np.array([r.values for r in recs], dtype=np.float64)
    n = len(recs)
    out = np.empty_like(arr)
    ranks = np.empty(n, dtype=np.int64)
    for col in range(arr.shape[1]):
        order = np.argsort(arr[:, col], kind="stable")
        ranks[order] = np.arange(n)
        out[:, col] = ranks / n
    return [TupleRecord(r.index, tuple(row)) for r, row in zip(recs, out)]


def baseline(rel: Relation, m: int, engine: AlgorithmId = AlgorithmId.SFS,
             seed: int = 0, counter: IoCounter | None = None,
             window_capacity: int = DEFAULT_WINDOW_CAPACITY) -> SkylineResult:
    """Skyline of one uniform without-replacement sample of size m."""
    if not 1 <= m <= rel.header.n:
        raise ValueError(f"sample size {m} outside [1, {rel.header.n}]")
    sample = sample_without_replacement(rel, m, seed, counter)
    return compute_skyline(sample.records, engine, window_capacity)


def verify_error(approx: SkylineResult, rel: Relation, s_v: int, seed: int,
                 counter: IoCounter | None = None) -> float:
    """Fraction of a fresh random sample not covered by ``approx``.

    Draws min(s_v, n) records without replacement; the returned fraction is
    an unbiased estimate of the relation's uncovered fraction (exact when
    the draw is the whole relation).
    """
    if s_v < 1:
        raise ValueError("verification sample size must be positive")
    k = min(s_v, rel.header.n)
    sample = sample_without_replacement(rel, k, seed, counter)
    vals = sample.values()
    covered = covered_mask(vals, approx.values_array())
    return float(np.count_nonzero(~covered)) / k


def _fresh_indices(rng: np.random.Generator, n: int, k: int, used: set[int]) -> np.ndarray:
    """k distinct indices outside ``used`` (uniform over the complement);
    updates ``used`` in place."""
    out: list[int] = []
    while len(out) < k:
        batch = rng.integers(0, n, size=max(64, 2 * (k - len(out))))
        for t in batch.tolist():
            if t not in used:
                used.add(t)
                out.append(t)
                if len(out) == k:
                    break
    return np.sort(np.asarray(out, dtype=np.int64))


def double(rel: Relation, params: ApproxParams, seed: int,
           counter: IoCounter | None = None) -> tuple[SkylineResult, DoubleTrace]:
    """Sample-doubling approximation with Monte-Carlo verification.

    Start from s_initial records; while the verified estimate exceeds
    2/3 epsilon, double the cumulative sample by drawing as many fresh
    records again, merge their skyline into the running answer, and
    re-verify with an independent sample. If doubling would exceed the
    relation, fall back to the exact skyline of a full scan (flagged in the
    trace as "exhausted"; its answer has error 0 by construction).
    """
    n = rel.header.n
    if n < 2:
        raise ValueError("relation must have at least 2 records")
    counter = counter if counter is not None else IoCounter()
    s_v = required_verification_size(n, params.epsilon, params.delta)
    s_i = params.s_initial if params.s_initial is not None else s_v
    threshold = 2.0 * params.epsilon / 3.0

    m = min(s_i, n)
    first = sample_without_replacement(rel, m, derive_seed(seed, 1, 0), counter)
    used = set(first.source_indices)
    draw_rng = make_rng(seed, 0xD0)
    sky = compute_skyline(first.records, params.engine, params.window_capacity)

    rounds: list[RoundLog] = []
    j = 1
    while True:
        eps_hat = verify_error(sky, rel, s_v, derive_seed(seed, j, 1), counter)
        rounds.append(RoundLog(j, m, len(sky.members), eps_hat, min(s_v, n),
                               counter.pages_read))
        if eps_hat <= threshold:
            reason = REASON_CONVERGED
            break
        if 2 * m > n:
            # cannot double without replacement: answer exactly
            full = compute_skyline(scan(rel, counter), params.engine,
                                   params.window_capacity)
            sky = full
            m = n
            j += 1
            rounds.append(RoundLog(j, m, len(sky.members), 0.0, 0, counter.pages_read))
            reason = REASON_EXHAUSTED
            break
        j += 1
        fresh = _fresh_indices(draw_rng, n, m, used)
        vals = fetch_values(rel, fresh, counter)
        fresh_records = [TupleRecord(int(i), tuple(row))
                         for i, row in zip(fresh.tolist(), vals)]
        m *= 2
        sky = merge_skyline(sky, compute_skyline(fresh_records, params.engine,
                                                 params.window_capacity))

    trace = DoubleTrace(rounds=tuple(rounds), final_m=m, terminated=True, reason=reason)
    return sky, trace
