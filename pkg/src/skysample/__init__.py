"""Sampling-based approximate skyline queries over page-organized relations.

Library layout:

* ``core`` — dominance semantics, reference oracles, error metric
* ``algorithms`` — exact skyline engines (BNL, sort-filter, divide&conquer)
* ``storage`` — relation file format, page-accounted I/O, samplers, CSV ingest
* ``approx`` — fixed-sample and doubling approximations plus error predictors
* ``datagen`` — synthetic generators with correlation control
* ``report`` — benchmark trials, CSV/JSON reports, figures
* ``cli`` — the ``skysample`` command
"""

from .core import (
    AlgorithmId,
    DimensionMismatchError,
    ErrorReport,
    SkylineResult,
    TupleRecord,
    brute_force_skyline,
    dominated_count,
    dominates,
    dominates_or_equal,
    is_antichain,
    true_error,
)
from .algorithms import (
    DEFAULT_WINDOW_CAPACITY,
    bnl_skyline,
    compute_skyline,
    dc_skyline,
    merge_skyline,
    sfs_skyline,
)
from .storage import (
    IntegrityError,
    IoCounter,
    Relation,
    RelationFormatError,
    RelationHeader,
    Sample,
    ingest_csv,
    make_header,
    sample_without_replacement,
    scan,
    scan_batches,
    write_relation,
)
from .approx import (
    ApproxParams,
    DoubleTrace,
    ErrorPrediction,
    baseline,
    double,
    estimate_error_from_sample,
    harmonic,
    predict_error,
    rank_transform,
    required_verification_size,
    verify_error,
)
from .datagen import Distribution, GenSpec, generate, measured_pcc
from .report import (
    BenchRow,
    baseline_trials,
    error_table,
    relation_true_error,
    write_report_csv,
    write_report_json,
)

__version__ = "0.1.0"
