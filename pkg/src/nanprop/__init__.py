"""Black-box sparsity detection by NaN contamination, with graph-coloring
Jacobian compression."""

from .pattern import (
    DEP,
    UNKNOWN,
    ZERO,
    ColumnAdjacency,
    DiffReport,
    SparsityPattern,
    compare,
    gramian_adjacency,
    union,
)
from .payload import decode, encode, PAYLOAD_CAPACITY
from .blackbox import (
    BlackBoxSpec,
    EvalResult,
    InputKind,
    InputSpec,
    evaluate,
    fixture_spec,
    list_fixtures,
)
from .tracer import (
    BaselineInvalid,
    DensityBelief,
    NanIncompatible,
    PayloadCapacityExceeded,
    TraceReport,
    fd_sparsity,
    trace_chunked,
    trace_onehot,
    trace_payload,
)
from .coloring import (
    Coloring,
    CompressedJacobian,
    DecompressionAmbiguity,
    color_columns,
    compressed_jacobian,
    dense_jacobian,
    speedup,
)
from .branching import TraceSession, observe, session_init

__version__ = "0.1.0"
