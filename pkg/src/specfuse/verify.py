"""Cross-model verification: every model scores every other model's segment."""

from __future__ import annotations

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .backend.base import Backend, BackendUnavailable
from .types import Candidate, ModelId, ScoreItem, SequenceScore, mean_prob

logger = logging.getLogger(__name__)


class VerifyError(RuntimeError):
    """Score shapes disagree with the batches that produced them."""


@dataclass(frozen=True)
class ScoreMatrix:
    """``scores[i][n]``: mean probability of candidate ``i`` under scorer ``n``."""

    scores: tuple[tuple[float, ...], ...]

    def __len__(self) -> int:
        return len(self.scores)

    def row(self, i: int) -> tuple[float, ...]:
        return self.scores[i]

    def tolist(self) -> list[list[float]]:
        return [list(r) for r in self.scores]


@dataclass(frozen=True)
class QualityVector:
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


def build_verify_batches(context: str, candidates: Sequence[Candidate]) -> list[list[tuple[int, ScoreItem]]]:
    """Per scorer position, the ``(candidate position, item)`` pairs it must score.

    A scorer never sees its own candidate; its self-score comes from
    generation. Failed placeholders carry no text and are scored by no one.
    """
    batches = []
    for n in range(len(candidates)):
        batch = []
        for i, c in enumerate(candidates):
            if i == n or c.failed:
                continue
            batch.append((i, ScoreItem(context, c.text, c.finished)))
        batches.append(batch)
    return batches


def _score_one(backend: Backend, model: ModelId, session: str, items: list[ScoreItem]) -> list[SequenceScore]:
    if not items:
        return []
    try:
        scores = backend.score_batch(session, items)
    except BackendUnavailable as exc:
        logger.warning("verify failed for scorer %s: %s", model, exc)
        return [SequenceScore(0.0, 1)] * len(items)
    if len(scores) != len(items):
        raise VerifyError(f"{model} returned {len(scores)} scores for {len(items)} items")
    return scores


def score_batches(
    batches: Sequence[Sequence[tuple[int, ScoreItem]]],
    candidates: Sequence[Candidate],
    backends: Mapping[int, Backend],
    sessions: Mapping[int, str],
    executor: Executor | None = None,
) -> list[list[SequenceScore]]:
    """Run one ``score_batch`` per scorer concurrently; an unreachable scorer scores zeros."""
    jobs = [
        (backends[c.model.index], c.model, sessions[c.model.index], [item for _, item in batch])
        for c, batch in zip(candidates, batches)
    ]
    busy = [j for j in jobs if j[3]]
    if len(busy) <= 1:
        return [_score_one(*j) for j in jobs]
    if executor is not None:
        return [f.result() for f in [executor.submit(_score_one, *j) for j in jobs]]
    with ThreadPoolExecutor(max_workers=len(busy)) as pool:
        return [f.result() for f in [pool.submit(_score_one, *j) for j in jobs]]


def assemble_score_matrix(candidates: Sequence[Candidate], cross: Sequence[Sequence[SequenceScore]]) -> ScoreMatrix:
    k = len(candidates)
    layout = build_verify_batches("", candidates)
    if len(cross) != k or any(len(c) != len(b) for c, b in zip(cross, layout)):
        raise VerifyError("cross scores do not match the verify batch layout")
    rows = [[0.0] * k for _ in range(k)]
    for i, c in enumerate(candidates):
        if not c.failed:
            rows[i][i] = c.self_score
    for n, (batch, scores) in enumerate(zip(layout, cross)):
        for (i, _), s in zip(batch, scores):
            rows[i][n] = s.mean_prob
    return ScoreMatrix(tuple(tuple(r) for r in rows))


def quality_scores(matrix: ScoreMatrix) -> QualityVector:
    """Row means: each candidate's score averaged over all active scorers, itself included."""
    return QualityVector(tuple(mean_prob(row) for row in matrix.scores))


def select_winner(quality: QualityVector, candidates: Sequence[Candidate]) -> tuple[ModelId, Candidate]:
    """Highest quality wins; ties go to the lowest model index. Failed candidates never win."""
    if not len(quality):
        raise ValueError("empty quality vector")
    best = None
    for i, c in enumerate(candidates):
        if c.failed:
            continue
        if best is None or quality[i] > quality[best] or (
            quality[i] == quality[best] and c.model.index < candidates[best].model.index
        ):
            best = i
    if best is None:
        raise ValueError("no electable candidate")
    return candidates[best].model, candidates[best]


@dataclass(frozen=True)
class VerifyResult:
    matrix: ScoreMatrix
    quality: QualityVector
    winner: ModelId
    segment: Candidate
    winner_position: int


def verify_round(
    context: str,
    candidates: Sequence[Candidate],
    backends: Mapping[int, Backend],
    sessions: Mapping[int, str],
    executor: Executor | None = None,
) -> VerifyResult:
    batches = build_verify_batches(context, candidates)
    cross = score_batches(batches, candidates, backends, sessions, executor)
    matrix = assemble_score_matrix(candidates, cross)
    quality = quality_scores(matrix)
    winner, segment = select_winner(quality, candidates)
    return VerifyResult(matrix, quality, winner, segment, list(candidates).index(segment))
