"""Command-line interface.

Subcommands: generate, ingest, exact, baseline, double, error-table.
Every command is deterministic for a fixed --seed (wall-clock fields aside).
Exit codes: 0 success, 2 usage, 3 I/O failure, 4 data integrity.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

from . import report
from .approx import ApproxParams, double, predict_error, required_verification_size
from .algorithms import DEFAULT_WINDOW_CAPACITY, compute_skyline
from .core import AlgorithmId
from .datagen import Distribution, GenSpec, generate
from .storage import IntegrityError, IoCounter, Relation, ingest_csv, scan

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4

_ENGINES = [a.value for a in AlgorithmId]


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def cmd_generate(args) -> int:
    spec = GenSpec(n=args.n, d=args.d, distribution=Distribution(args.dist),
                   target_pcc=args.pcc, seed=args.seed, bins=args.bins)
    rel = generate(spec, args.out, tuple_bytes=args.tuple_bytes,
                   page_bytes=args.page_bytes)
    _emit({
        "path": str(rel.path),
        "n": rel.header.n,
        "d": rel.header.d,
        "tuple_bytes": rel.header.tuple_bytes,
        "page_bytes": rel.header.page_bytes,
        "data_pages": rel.header.data_pages,
    })
    return EXIT_OK


def cmd_ingest(args) -> int:
    columns = [int(c) for c in args.columns.split(",")] if args.columns else None
    negate = None
    if args.negate:
        negate = [bool(int(f)) for f in args.negate.split(",")]
    rel = ingest_csv(args.csv, args.out, columns=columns, negate=negate,
                     has_header=args.has_header, tuple_bytes=args.tuple_bytes,
                     page_bytes=args.page_bytes)
    _emit({"path": str(rel.path), "n": rel.header.n, "d": rel.header.d})
    return EXIT_OK


def cmd_exact(args) -> int:
    rel = Relation.open(args.rel)
    counter = IoCounter()
    t0 = time.perf_counter_ns()
    sky = compute_skyline(scan(rel, counter), AlgorithmId(args.engine),
                          window_capacity=args.window)
    wall = time.perf_counter_ns() - t0
    _emit({
        "engine": args.engine,
        "skyline_size": len(sky.members),
        "comparisons": sky.comparisons,
        "pages_read": counter.pages_read,
        "wall_nanos": wall,
    })
    if args.dump:
        for r in sky.members:
            print(",".join([str(r.index)] + [repr(v) for v in r.values]))
    return EXIT_OK


def cmd_baseline(args) -> int:
    rel = Relation.open(args.rel)
    outcomes = report.baseline_trials(rel, args.m, args.trials, args.seed,
                                      AlgorithmId(args.engine))
    errors = [o.error for o in outcomes]
    n, d = rel.header.n, rel.header.d
    predicted = predict_error(d, args.m, n).predicted_mean if args.m < n else 0.0
    payload = {
        "n": n,
        "d": d,
        "m": args.m,
        "engine": args.engine,
        "seed": args.seed,
        "trials": args.trials,
        "mean_error": statistics.fmean(errors),
        "stddev_error": statistics.stdev(errors) if args.trials >= 2 else None,
        "predicted_error": predicted,
        "estimated_error": report.mean_sample_estimate(rel, outcomes, args.m),
        "mean_pages_read": sum(o.pages_read for o in outcomes) / len(outcomes),
    }
    _emit(payload)
    return EXIT_OK


def cmd_double(args) -> int:
    rel = Relation.open(args.rel)
    params = ApproxParams(epsilon=args.epsilon, delta=args.delta,
                          s_initial=args.s_initial, engine=AlgorithmId(args.engine))
    counter = IoCounter()
    t0 = time.perf_counter_ns()
    sky, trace = double(rel, params, args.seed, counter)
    wall = time.perf_counter_ns() - t0
    if args.trace:
        report.write_trace_jsonl(trace, args.trace)
    payload = {
        "epsilon": args.epsilon,
        "delta": args.delta,
        "s_v": required_verification_size(rel.header.n, args.epsilon, args.delta),
        "rounds": len(trace.rounds),
        "final_m": trace.final_m,
        "terminated": trace.terminated,
        "reason": trace.reason,
        "skyline_size": len(sky.members),
        "eps_hat": trace.rounds[-1].eps_hat,
        "pages_read": counter.pages_read,
        "full_scan_pages": rel.header.data_pages,
        "wall_nanos": wall,
    }
    if args.oracle:
        payload["true_error"] = report.relation_true_error(rel, sky).error
    _emit(payload)
    return EXIT_OK


def cmd_error_table(args) -> int:
    relations = [Relation.open(p) for p in args.rel]
    rows = report.error_table(relations, args.m, args.trials, args.seed,
                              AlgorithmId(args.engine))
    out = report.write_report_csv(rows, args.out)
    produced = {"csv": str(out)}
    if args.json:
        produced["json"] = str(report.write_report_json(rows, args.json))
    if args.plot_dir:
        figures = report.render_report_figures(rows, args.plot_dir)
        produced["figures"] = [str(p) for p in figures]
    _emit(produced)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skysample",
        description="Sampling-based approximate skyline toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic relation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--dist", choices=[d.value for d in Distribution],
                   default=Distribution.INDEPENDENT.value)
    p.add_argument("--pcc", type=float, default=None,
                   help="target correlation of attributes 0 and 1 (default +/-0.5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=None,
                   help="quantize values to this many levels")
    p.add_argument("--tuple-bytes", type=int, default=None)
    p.add_argument("--page-bytes", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="convert a CSV file to a relation")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--columns", default=None, help="comma-separated column indices")
    p.add_argument("--negate", default=None,
                   help="comma-separated 0/1 flags per selected column")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--tuple-bytes", type=int, default=None)
    p.add_argument("--page-bytes", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("exact", help="exact skyline of a relation")
    p.add_argument("--rel", required=True)
    p.add_argument("--engine", choices=_ENGINES, default=AlgorithmId.SFS.value)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW_CAPACITY)
    p.add_argument("--dump", action="store_true", help="print skyline members")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("baseline", help="fixed-size sample approximation")
    p.add_argument("--rel", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=_ENGINES, default=AlgorithmId.SFS.value)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("double", help="doubling loop with verified error")
    p.add_argument("--rel", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--s-initial", type=int, default=None)
    p.add_argument("--engine", choices=_ENGINES, default=AlgorithmId.SFS.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write per-round JSON lines here")
    p.add_argument("--oracle", action="store_true",
                   help="score the answer against the full relation")
    p.set_defaults(func=cmd_double)

    p = sub.add_parser("error-table", help="sweep relations x sample sizes")
    p.add_argument("--rel", action="append", required=True)
    p.add_argument("--m", type=int, action="append", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=_ENGINES, default=AlgorithmId.SFS.value)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", default=None, help="also write rows as JSON")
    p.add_argument("--plot-dir", default=None, help="render figures into this directory")
    p.set_defaults(func=cmd_error_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
