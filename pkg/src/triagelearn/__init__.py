"""Adaptive prioritization of reported security events.

A per-type partial-least-squares model predicts relative priorities from
environmental factors and absorbs the administrator's feedback one tick at a
time through a recursive update. Pairs the administrator orders differently
from the engine are latched out of training and feed an integer correction
learned from shared history, so rankings converge to the administrator's
even when global context never appears in the factors.
"""

from .engine import (
    MismatchFlags,
    ModelRegistry,
    RankedList,
    RankEntry,
    TickReport,
    TriageEngine,
    history_adapted_response,
    merge_models,
    predict_priority,
    rank_events,
)
from .events import (
    EventInstance,
    HistoryDB,
    Priority,
    TickRecord,
    ViolationType,
    load_history,
    save_history,
)
from .meta import DeltaBreakdown, MismatchVerdict, delta, lambda_term, phi
from .pls import (
    CoefficientVector,
    DataBlock,
    PLSComponent,
    PLSModel,
    extract_coefficients,
    nipals_fit,
    numerical_rank,
    predict,
    rpls_update,
)
from .simulate import (
    LinearOracle,
    MetaOracle,
    StreamSpec,
    generate_stream,
    oracle_priorities,
    run_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CoefficientVector",
    "DataBlock",
    "DeltaBreakdown",
    "EventInstance",
    "HistoryDB",
    "LinearOracle",
    "MetaOracle",
    "MismatchFlags",
    "MismatchVerdict",
    "ModelRegistry",
    "PLSComponent",
    "PLSModel",
    "Priority",
    "RankEntry",
    "RankedList",
    "StreamSpec",
    "TickRecord",
    "TickReport",
    "TriageEngine",
    "ViolationType",
    "delta",
    "extract_coefficients",
    "generate_stream",
    "history_adapted_response",
    "lambda_term",
    "load_history",
    "merge_models",
    "nipals_fit",
    "numerical_rank",
    "oracle_priorities",
    "phi",
    "predict",
    "predict_priority",
    "rank_events",
    "rpls_update",
    "run_stream",
    "save_history",
]
