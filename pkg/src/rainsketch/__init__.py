"""Streaming sketches for queue-position estimation without per-client state.

The building blocks, bottom up:

- hashing: seeded client-id hashing onto geometric sketch positions
- fm: bit-vector distinct-count sketches and seeded ensembles
- rank: min-timestamp sketches answering distinct counts below any threshold
- window: rotating double-buffered windows with rank queries and error bounds
- oracle: exact brute-force references for tests and simulation
- sim / cli: workload simulator and the command line front end

Hot kernels run on a compiled extension when available and a numpy
fallback otherwise; see backend_name().
"""

from ._backend import backend_name
from .fm import (
    AccuracyParams,
    FMEnsemble,
    FMSketch,
    FM_CORRECTION,
    SketchMismatchError,
    required_sketch_count,
)
from .hashing import derive_seeds, digest64, position_of
from .oracle import ExactQueue, ExactWindowCounter, NotWaitingError
from .rank import (
    RainCheckEvent,
    RankEnsemble,
    RankSketchRow,
    SENTINEL,
    TIMESTAMP_MAX,
)
from .serialize import (
    dump_fm_ensemble,
    dump_rank_ensemble,
    dump_window,
    load_fm_ensemble,
    load_rank_ensemble,
    load_window,
    window_snapshot_size,
)
from .sim import QueryRecord, SimConfig, SimResult, run_simulation
from .window import (
    RankEstimate,
    StaleWindowError,
    TimeRegressionError,
    WindowConfig,
    WindowedEstimator,
    window_error_bound,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyParams",
    "ExactQueue",
    "ExactWindowCounter",
    "FMEnsemble",
    "FMSketch",
    "FM_CORRECTION",
    "NotWaitingError",
    "QueryRecord",
    "RainCheckEvent",
    "RankEnsemble",
    "RankEstimate",
    "RankSketchRow",
    "SENTINEL",
    "SimConfig",
    "SimResult",
    "SketchMismatchError",
    "StaleWindowError",
    "TIMESTAMP_MAX",
    "TimeRegressionError",
    "WindowConfig",
    "WindowedEstimator",
    "backend_name",
    "derive_seeds",
    "digest64",
    "dump_fm_ensemble",
    "dump_rank_ensemble",
    "dump_window",
    "load_fm_ensemble",
    "load_rank_ensemble",
    "load_window",
    "position_of",
    "required_sketch_count",
    "run_simulation",
    "window_error_bound",
    "window_snapshot_size",
]
