"""A backend that replays a fixed script, for tests and demos."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from ..types import Candidate, ModelId, SamplingParams, ScoreItem, SequenceScore
from .base import Backend, BackendUnavailable, InvalidInput


@dataclass(frozen=True)
class Segment:
    text: str
    token_probs: tuple[float, ...]
    finished: bool = False

    @classmethod
    def coerce(cls, obj) -> Segment:
        if isinstance(obj, Segment):
            return obj
        if isinstance(obj, dict):
            return cls(obj["text"], tuple(obj["token_probs"]), bool(obj.get("finished", False)))
        text, probs, *rest = obj
        return cls(text, tuple(probs), bool(rest[0]) if rest else False)


class ScriptedBackend(Backend):
    """Returns scripted segments in order, one per ``generate`` call per session.

    Once the script runs out the last segment repeats. Scores come from
    ``scorer(context, continuation)`` when given, else from the
    ``scores`` table keyed by continuation text, else ``default_score``.
    ``fail_generate`` lists 1-based call numbers (per session) that raise
    :class:`BackendUnavailable`; ``delay`` sleeps before every generate.
    """

    def __init__(
        self,
        model_id: ModelId,
        segments: Sequence,
        scores: dict[str, float] | None = None,
        default_score: float = 0.5,
        scorer: Callable[[str, str], float] | None = None,
        fail_generate: Sequence[int] = (),
        fail_score: bool = False,
        delay: float = 0.0,
    ):
        if not segments:
            raise InvalidInput("script needs at least one segment")
        self.model = model_id
        self.segments = [Segment.coerce(s) for s in segments]
        self.scores = dict(scores or {})
        self.default_score = default_score
        self.scorer = scorer
        self.fail_generate = set(fail_generate)
        self.fail_score = fail_score
        self.delay = delay
        self.calls: dict[str, int] = {}
        self.score_calls: list[list[ScoreItem]] = []
        self.contexts: list[str] = []
        self._lock = threading.Lock()

    def generate(self, session, context, max_new_tokens, params: SamplingParams) -> Candidate:
        if self.delay:
            time.sleep(self.delay)
        with self._lock:
            n = self.calls.get(session, 0) + 1
            self.calls[session] = n
            self.contexts.append(context)
        if n in self.fail_generate:
            raise BackendUnavailable(self.model, f"scripted failure on call {n}")
        seg = self.segments[min(n, len(self.segments)) - 1]
        probs = seg.token_probs[:max_new_tokens]
        finished = seg.finished and len(probs) == len(seg.token_probs)
        return Candidate(self.model, seg.text, probs, finished)

    def score_batch(self, session, items: Sequence[ScoreItem]) -> list[SequenceScore]:
        with self._lock:
            self.score_calls.append(list(items))
        if self.fail_score:
            raise BackendUnavailable(self.model, "scripted scoring failure")
        out = []
        for item in items:
            if self.scorer is not None:
                p = self.scorer(item.context, item.continuation)
            else:
                p = self.scores.get(item.continuation, self.default_score)
            out.append(SequenceScore(float(p), max(1, len(item.continuation.split()))))
        return out
