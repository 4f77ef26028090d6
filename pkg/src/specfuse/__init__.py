"""Segment-level ensemble decoding across heterogeneous language models."""

from .engine import (
    CollectingSink,
    EnsembleConfig,
    NdjsonSink,
    QueryAborted,
    QueryResult,
    RoundRecord,
    TextSink,
    run_query,
)
from .exit import ExitMode, ExitState
from .kernels import BACKEND as KERNEL_BACKEND
from .types import Candidate, ModelId, SamplingParams, ScoreItem, SequenceScore

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CollectingSink",
    "EnsembleConfig",
    "ExitMode",
    "ExitState",
    "KERNEL_BACKEND",
    "ModelId",
    "NdjsonSink",
    "QueryAborted",
    "QueryResult",
    "RoundRecord",
    "SamplingParams",
    "ScoreItem",
    "SequenceScore",
    "TextSink",
    "run_query",
]
