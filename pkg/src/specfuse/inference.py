"""Parallel candidate generation for one round."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .backend.base import Backend, BackendUnavailable
from .types import Candidate, ModelId, SamplingParams

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class RoundFailure(RuntimeError):
    """Every active backend was unavailable in the same round."""


@dataclass(frozen=True)
class InferenceRoundResult:
    candidates: tuple[Candidate, ...]
    elapsed: float


def derive_seed(base_seed: int, model_index: int, round_index: int) -> int:
    """``base_seed`` XOR a stable 64-bit hash of ``(model_index, round_index)``."""
    digest = hashlib.blake2b(f"{model_index}:{round_index}".encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "little")) & SEED_MASK


def _generate_one(backend: Backend, model: ModelId, session: str, context: str, L: int, params: SamplingParams) -> Candidate:
    try:
        cand = backend.generate(session, context, L, params)
    except BackendUnavailable as exc:
        logger.warning("round generate failed for %s: %s", model, exc)
        return Candidate.unavailable(model)
    if not 1 <= cand.num_tokens <= L or not (cand.text or cand.finished):
        logger.warning("%s returned a malformed candidate; treating as unavailable", model)
        return Candidate.unavailable(model)
    if cand.model != model:
        cand = Candidate(model, cand.text, cand.token_probs, cand.finished)
    return cand


def run_inference_round(
    active: Sequence[ModelId],
    backends: Mapping[int, Backend],
    context: str,
    L: int,
    params: SamplingParams,
    sessions: Mapping[int, str],
    round_index: int,
    base_seed: int = 0,
    per_model_params: Mapping[int, SamplingParams] | None = None,
    executor: Executor | None = None,
) -> InferenceRoundResult:
    """Ask every active model for a segment of at most ``L`` tokens.

    Each model samples with its own seed from :func:`derive_seed`, so its
    output does not depend on which other models share the round.
    Unavailable backends contribute a failed placeholder candidate; if all
    of them fail, :class:`RoundFailure` is raised.
    """
    if not active:
        raise ValueError("no active models")
    if L < 1:
        raise ValueError("segment length must be >= 1")
    start = time.perf_counter()
    jobs = []
    for m in sorted(active):
        p = (per_model_params or {}).get(m.index, params)
        p = p.with_seed(derive_seed(base_seed, m.index, round_index))
        jobs.append((backends[m.index], m, sessions[m.index], context, L, p))

    if len(jobs) == 1:
        candidates = [_generate_one(*jobs[0])]
    elif executor is not None:
        candidates = [f.result() for f in [executor.submit(_generate_one, *j) for j in jobs]]
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            candidates = [f.result() for f in [pool.submit(_generate_one, *j) for j in jobs]]

    if all(c.failed for c in candidates):
        raise RoundFailure(f"all {len(candidates)} backends unavailable")
    return InferenceRoundResult(tuple(candidates), time.perf_counter() - start)


def generate_standalone(
    backend: Backend,
    model: ModelId,
    prompt: str,
    L: int,
    params: SamplingParams,
    base_seed: int = 0,
    max_rounds: int = 64,
    max_tokens: int = 1024,
    session: str = "standalone",
) -> str:
    """Single-model generation in segments, seeded exactly as in an ensemble."""
    context = prompt
    text = []
    tokens = 0
    for t in range(1, max_rounds + 1):
        cand = backend.generate(session, context, L, params.with_seed(derive_seed(base_seed, model.index, t)))
        text.append(cand.text)
        context += cand.text
        tokens += cand.num_tokens
        if cand.finished or tokens >= max_tokens:
            break
    backend.close_session(session)
    return "".join(text)
