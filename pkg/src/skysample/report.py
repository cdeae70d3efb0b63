"""Benchmark harness: repeated-trial error measurement, delimited reports,
and the figures rendered alongside them.

The true-error oracle here streams the whole relation once per evaluation,
O(|answer| * n) comparisons in O(1) memory, and must agree with the
pure-Python reference counter in core on any input.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .approx import baseline, estimate_error_from_sample, predict_error
from .core import AlgorithmId, ErrorReport, SkylineResult, TupleRecord, covered_mask
from .rng import derive_seed
from .storage import IoCounter, Relation, scan_batches

REPORT_COLUMNS = [
    "relation",
    "n",
    "d",
    "m",
    "engine",
    "seed",
    "trials",
    "mean_error",
    "stddev_error",
    "predicted_error",
    "mean_pages_read",
    "mean_wall_nanos",
]


def relation_true_error(rel: Relation, members: Sequence[TupleRecord] | SkylineResult,
                        counter: IoCounter | None = None) -> ErrorReport:
    """Exact uncovered fraction of ``rel`` under a candidate answer.

    Single sequential scan; the candidate is held in memory as a value
    matrix and tested block-vectorized against every page batch.
    """
    if isinstance(members, SkylineResult):
        member_values = members.values_array()
    else:
        members = list(members)
        member_values = (
            np.array([r.values for r in members], dtype=np.float64)
            if members else np.empty((0, 0))
        )
    if rel.header.n == 0:
        raise ValueError("error is undefined for an empty relation")
    covered = 0
    for _, vals in scan_batches(rel, counter, pages_per_batch=512):
        if len(member_values):
            covered += int(np.count_nonzero(covered_mask(vals, member_values)))
    return ErrorReport(dominated_count=covered, total=rel.header.n)


@dataclass(frozen=True)
class TrialResult:
    seed: int
    error: float
    skyline_size: int
    pages_read: int
    wall_nanos: int


def baseline_trials(rel: Relation, m: int, trials: int, seed: int,
                    engine: AlgorithmId = AlgorithmId.SFS) -> list[TrialResult]:
    """Run the fixed-sample approximation ``trials`` times with derived seeds
    and score each answer against the full relation."""
    results = []
    for t in range(trials):
        trial_seed = derive_seed(seed, t)
        counter = IoCounter()
        t0 = time.perf_counter_ns()
        sky = baseline(rel, m, engine, trial_seed, counter)
        wall = time.perf_counter_ns() - t0  # scoring below is not the algorithm's cost
        sample_pages = counter.pages_read
        err = relation_true_error(rel, sky, counter).error
        results.append(TrialResult(
            seed=trial_seed,
            error=err,
            skyline_size=len(sky.members),
            pages_read=sample_pages,
            wall_nanos=wall,
        ))
    return results


@dataclass(frozen=True)
class BenchRow:
    relation: str
    n: int
    d: int
    m: int
    engine: str
    seed: int
    trials: int
    mean_error: float
    stddev_error: float | None
    predicted_error: float
    mean_pages_read: float
    mean_wall_nanos: float

    def as_record(self) -> dict:
        return {col: getattr(self, col) for col in REPORT_COLUMNS}


def error_table(relations: Iterable[Relation], sample_sizes: Sequence[int],
                trials: int, seed: int,
                engine: AlgorithmId = AlgorithmId.SFS) -> list[BenchRow]:
    """Sweep relations x sample sizes; one row per combination."""
    if trials < 1:
        raise ValueError("need at least one trial")
    rows = []
    for rel in relations:
        for m in sample_sizes:
            outcomes = baseline_trials(rel, m, trials, seed, engine)
            errors = [o.error for o in outcomes]
            n, d = rel.header.n, rel.header.d
            predicted = predict_error(d, m, n).predicted_mean if m < n else 0.0
            rows.append(BenchRow(
                relation=rel.path.name,
                n=n,
                d=d,
                m=m,
                engine=AlgorithmId(engine).value,
                seed=seed,
                trials=trials,
                mean_error=statistics.fmean(errors),
                stddev_error=statistics.stdev(errors) if trials >= 2 else None,
                predicted_error=predicted,
                mean_pages_read=statistics.fmean(o.pages_read for o in outcomes),
                mean_wall_nanos=statistics.fmean(o.wall_nanos for o in outcomes),
            ))
    return rows


def write_report_csv(rows: Sequence[BenchRow], path: str | Path) -> Path:
    """RFC-4180 report with the fixed REPORT_COLUMNS order; a missing stddev
    (single trial) is an empty field."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            record = row.as_record()
            if record["stddev_error"] is None:
                record["stddev_error"] = ""
            writer.writerow(record)
    return path


def write_report_json(rows: Sequence[BenchRow], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump([row.as_record() for row in rows], f, indent=2)
        f.write("\n")
    return path


def write_trace_jsonl(trace, path: str | Path) -> Path:
    """One JSON object per verification round."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for record in trace.round_records():
            f.write(json.dumps(record) + "\n")
    return path


def _series(rows: Sequence[BenchRow]) -> dict[tuple[str, int], list[BenchRow]]:
    grouped: dict[tuple[str, int], list[BenchRow]] = {}
    for row in rows:
        grouped.setdefault((row.relation, row.d), []).append(row)
    for key in grouped:
        grouped[key].sort(key=lambda r: r.m)
    return grouped


def render_error_figure(rows: Sequence[BenchRow], path: str | Path) -> Path:
    """Measured mean error (solid) vs closed-form prediction (dashed) over m."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for (name, d), series in _series(rows).items():
        ms = [r.m for r in series]
        label = f"{name} d={d}"
        line, = ax.plot(ms, [r.mean_error for r in series], marker="o", label=label)
        ax.plot(ms, [r.predicted_error for r in series], linestyle="--",
                color=line.get_color(), alpha=0.7)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size m")
    ax.set_ylabel("mean uncovered fraction")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_stddev_figure(rows: Sequence[BenchRow], path: str | Path) -> Path:
    """Per-trial error standard deviation over m (rows with >= 2 trials)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for (name, d), series in _series(rows).items():
        pts = [(r.m, r.stddev_error) for r in series if r.stddev_error is not None]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="s",
                label=f"{name} d={d}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size m")
    ax.set_ylabel("error standard deviation")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(rows: Sequence[BenchRow], directory: str | Path) -> list[Path]:
    """Render the standard figure set next to the delimited output."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    produced = [
        render_error_figure(rows, directory / "error_vs_m.png"),
        render_stddev_figure(rows, directory / "error_stddev_vs_m.png"),
    ]
    return produced


def mean_sample_estimate(rel: Relation, outcomes: Sequence[TrialResult], m: int) -> float:
    """Average distribution-free estimate over a trial set."""
    n = rel.header.n
    return statistics.fmean(
        estimate_error_from_sample(o.skyline_size, m, n) for o in outcomes
    )
