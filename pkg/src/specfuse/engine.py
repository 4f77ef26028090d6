"""The round loop: generate, verify, emit, extend context, prune."""

from __future__ import annotations

import json
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Sequence

from .backend.base import Backend
from .exit import ExitDecision, ExitMode, ExitState, run_exit_check, update_state
from .inference import RoundFailure, run_inference_round
from .types import Candidate, ModelId, SamplingParams
from .verify import QualityVector, ScoreMatrix, verify_round

logger = logging.getLogger(__name__)

Sink = Callable[[dict], None]
Trace = Callable[[str, int], None]

STOP_REASONS = ("finished", "max_rounds", "max_tokens", "all_backends_failed")


@dataclass
class EnsembleConfig:
    backends: Sequence[Backend]
    L: int = 10
    sampling: SamplingParams = field(default_factory=SamplingParams)
    exit_mode: ExitMode = field(default_factory=ExitMode)
    max_rounds: int = 256
    max_total_tokens: int = 2048
    base_seed: int = 0
    per_model_sampling: dict[int, SamplingParams] = field(default_factory=dict)
    parallel: bool = True

    def __post_init__(self) -> None:
        if not self.backends:
            raise ValueError("ensemble needs at least one backend")
        idx = [b.model.index for b in self.backends]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate model indices: {idx}")
        if self.L < 1 or self.max_rounds < 1 or self.max_total_tokens < 1:
            raise ValueError("segment length and caps must be >= 1")

    @property
    def models(self) -> list[ModelId]:
        return sorted(b.model for b in self.backends)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    candidates: tuple[Candidate, ...]
    score_matrix: ScoreMatrix
    quality: QualityVector
    winner: ModelId
    winner_quality: float
    active_before: tuple[ModelId, ...]
    exited_this_round: tuple[ModelId, ...]
    active_after: tuple[ModelId, ...]
    exit_decision: ExitDecision | None = None

    @property
    def segment(self) -> Candidate:
        return next(c for c in self.candidates if c.model == self.winner)


@dataclass
class QueryResult:
    prompt: str
    text: str
    rounds: list[RoundRecord]
    stop_reason: str
    avg_active_models: float

    @property
    def winners(self) -> list[ModelId]:
        return [r.winner for r in self.rounds]


class QueryAborted(RuntimeError):
    """The sink raised; ``partial`` holds everything produced so far."""

    def __init__(self, message: str, partial: QueryResult):
        super().__init__(message)
        self.partial = partial


def segment_event(record: RoundRecord) -> dict:
    return {
        "type": "segment",
        "round": record.round,
        "model": str(record.winner),
        "text": record.segment.text,
        "quality": record.winner_quality,
        "active": [str(m) for m in record.active_before],
    }


def exit_event(round_index: int, models: Sequence[ModelId]) -> dict:
    return {"type": "exit", "round": round_index, "models": [str(m) for m in models]}


def done_event(result: QueryResult) -> dict:
    return {
        "type": "done",
        "stop_reason": result.stop_reason,
        "avg_active_models": result.avg_active_models,
        "total_rounds": len(result.rounds),
    }


def emit_segment(sink: Sink | None, event: dict) -> None:
    if sink is not None:
        sink(event)


class NdjsonSink:
    """Writes one JSON object per line and flushes after each event."""

    def __init__(self, stream: IO[str]):
        self.stream = stream

    def __call__(self, event: dict) -> None:
        self.stream.write(json.dumps(event) + "\n")
        self.stream.flush()


class TextSink:
    """Writes segment text as it arrives, then a newline when done."""

    def __init__(self, stream: IO[str], prompt: str = ""):
        self.stream = stream
        if prompt:
            stream.write(prompt)

    def __call__(self, event: dict) -> None:
        if event["type"] == "segment":
            self.stream.write(event["text"])
        elif event["type"] == "done":
            self.stream.write("\n")
        self.stream.flush()


class CollectingSink:
    def __init__(self):
        self.events: list[dict] = []

    def __call__(self, event: dict) -> None:
        self.events.append(event)


def run_query(
    config: EnsembleConfig,
    prompt: str,
    sink: Sink | None = None,
    trace: Trace | None = None,
    session_prefix: str | None = None,
) -> QueryResult:
    """Generate a full response for ``prompt`` with the ensemble in ``config``.

    Every round's winning segment goes to ``sink`` as soon as it is chosen,
    before the exit check and before the next round starts. ``trace``, when
    given, is called with ``("inference_start" | "verify_start", round)``.
    """
    if not prompt:
        raise ValueError("prompt must be nonempty")
    backends = {b.model.index: b for b in config.backends}
    prefix = session_prefix or uuid.uuid4().hex
    sessions = {i: f"{prefix}/{i}" for i in backends}
    state = ExitState.start(config.models)
    context = prompt
    pieces: list[str] = []
    rounds: list[RoundRecord] = []
    active_counts: list[int] = []
    tokens = 0
    stop = "max_rounds"

    def result() -> QueryResult:
        avg = sum(active_counts) / len(active_counts) if active_counts else 0.0
        return QueryResult(prompt, "".join(pieces), list(rounds), stop, avg)

    def send(event: dict) -> None:
        try:
            emit_segment(sink, event)
        except Exception as exc:
            raise QueryAborted(f"sink failed: {exc}", result()) from exc

    executor = None
    if config.parallel and len(backends) > 1:
        executor = ThreadPoolExecutor(max_workers=len(backends), thread_name_prefix="specfuse")
    try:
        while state.round < config.max_rounds:
            state.round += 1
            T = state.round
            active = list(state.active)
            active_counts.append(len(active))
            if trace:
                trace("inference_start", T)
            try:
                inf = run_inference_round(
                    active, backends, context, config.L, config.sampling, sessions, T,
                    base_seed=config.base_seed, per_model_params=config.per_model_sampling, executor=executor,
                )
            except RoundFailure as exc:
                logger.error("round %d: %s", T, exc)
                stop = "all_backends_failed"
                break
            if trace:
                trace("verify_start", T)
            ver = verify_round(context, inf.candidates, backends, sessions, executor)
            winner_quality = ver.quality[ver.winner_position]

            pieces.append(ver.segment.text)
            context += ver.segment.text
            tokens += ver.segment.num_tokens
            update_state(state, ver.quality.values, ver.winner)

            record = RoundRecord(
                T, inf.candidates, ver.matrix, ver.quality, ver.winner, winner_quality,
                tuple(active), (), tuple(active),
            )
            send(segment_event(record))

            decision = run_exit_check(state, config.exit_mode)
            record = RoundRecord(
                T, inf.candidates, ver.matrix, ver.quality, ver.winner, winner_quality,
                tuple(active), decision.exited, tuple(state.active), decision,
            )
            rounds.append(record)
            if decision.exited:
                logger.debug("round %d: exited %s", T, [str(m) for m in decision.exited])
                send(exit_event(T, decision.exited))

            if ver.segment.finished:
                stop = "finished"
                break
            if tokens >= config.max_total_tokens:
                stop = "max_tokens"
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
        for i, b in backends.items():
            b.close_session(sessions[i])

    out = result()
    send(done_event(out))
    return out
