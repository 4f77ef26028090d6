"""The contract every generative model in an ensemble implements."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

from ..types import Candidate, ModelId, SamplingParams, ScoreItem, SequenceScore


class BackendError(Exception):
    """Base class for backend failures."""


class BackendUnavailable(BackendError):
    """The backend could not be reached or answered with garbage."""

    def __init__(self, model: ModelId | None, message: str = "backend unavailable"):
        super().__init__(f"{model}: {message}" if model is not None else message)
        self.model = model


class InvalidInput(BackendError, ValueError):
    pass


class Backend(ABC):
    """A generative model addressed by text.

    Contexts and continuations cross model boundaries as strings; every
    backend tokenizes with its own vocabulary. Calls within one session are
    serialized by the caller and carry a monotonically growing context, which
    implementations may use to reuse prefix work. Results must never depend
    on that reuse.
    """

    model: ModelId

    @abstractmethod
    def generate(
        self, session: str, context: str, max_new_tokens: int, params: SamplingParams
    ) -> Candidate:
        """Continue ``context`` by at most ``max_new_tokens`` tokens."""

    @abstractmethod
    def score_batch(self, session: str, items: Sequence[ScoreItem]) -> list[SequenceScore]:
        """Teacher-forced mean token probability for each item, index-aligned."""

    def close_session(self, session: str) -> None:
        """Drop any cached state held for ``session``."""
