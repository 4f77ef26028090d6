"""Value types shared by every stage of the round loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class ModelId:
    index: int
    name: str = field(compare=False, default="")

    def __str__(self) -> str:
        return self.name or f"model{self.index}"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_p: float = 0.9
    seed: int = 0
    do_sample: bool = True

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    def with_seed(self, seed: int) -> SamplingParams:
        return SamplingParams(self.temperature, self.top_p, seed, self.do_sample)


def mean_prob(values) -> float:
    """Correctly rounded arithmetic mean; independent of summation order."""
    values = list(values)
    if not values:
        return 0.0
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class Candidate:
    """One model's proposed segment for a round.

    ``token_probs`` holds the producer's probability for every token it drew,
    including the end-of-sequence token when ``finished`` is set (that token
    never appears in ``text``). ``failed`` marks the synthetic placeholder
    used when the producer's backend was unreachable.
    """

    model: ModelId
    text: str
    token_probs: tuple[float, ...]
    finished: bool = False
    failed: bool = False

    @property
    def self_score(self) -> float:
        return mean_prob(self.token_probs)

    @property
    def num_tokens(self) -> int:
        return len(self.token_probs)

    @classmethod
    def unavailable(cls, model: ModelId) -> Candidate:
        return cls(model=model, text="", token_probs=(), finished=False, failed=True)


@dataclass(frozen=True)
class SequenceScore:
    mean_prob: float
    token_count: int

    def __post_init__(self) -> None:
        if self.token_count < 1:
            raise ValueError("token_count must be >= 1")


@dataclass(frozen=True)
class ScoreItem:
    """A (context, continuation) pair for teacher-forced scoring.

    With ``finished`` set the scorer also charges its own end-of-sequence
    token after the continuation, so finished segments are judged on where
    they stop as well as what they say.
    """

    context: str
    continuation: str
    finished: bool = False
