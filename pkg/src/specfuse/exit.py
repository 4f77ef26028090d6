"""Model exit: prune models unlikely to produce winning segments later on.

Each round the cumulative quality of every active model is turned into a
survival probability by a softmax whose temperature grows with the round
count and with how spread out recent wins are. Models whose probability
falls below ``lambda / n`` leave the query for good.

Boundary convention for the recency weights: a win ``d = T - round`` steps
ago weighs 1 for ``d`` in [0, 4), 3/4 for [4, 8), 1/2 for [8, 12) and 1/4
from 12 on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .types import ModelId

VARIANTS = ("off", "full", "no_entropy", "fixed_temp", "no_quality_score")


@dataclass(frozen=True)
class ExitMode:
    """Exit policy. ``tau=None`` with ``fixed_temp`` means ``sqrt(T)``."""

    variant: str = "full"
    lam: float = 0.5
    tau: float | None = None
    window: int | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown exit variant {self.variant!r}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must be in (0, 1), got {self.lam}")
        if self.variant == "fixed_temp" and self.tau is not None and not self.tau > 0:
            raise ValueError("fixed temperature must be positive")
        if self.variant == "no_quality_score" and (self.window is None or self.window < 1):
            raise ValueError("no_quality_score needs a positive window")

    @classmethod
    def parse(cls, text: str, lam: float = 0.5) -> ExitMode:
        """Parse the CLI spelling: ``full``, ``off``, ``no-entropy``,
        ``fixed-temp:1``, ``fixed-temp:sqrtT``, ``no-quality-score:N``."""
        name, _, arg = text.strip().partition(":")
        name = name.replace("-", "_")
        if name == "fixed_temp":
            if arg in ("", "sqrtT", "sqrt(T)", "sqrt"):
                return cls("fixed_temp", lam, tau=None)
            return cls("fixed_temp", lam, tau=float(arg))
        if name == "no_quality_score":
            return cls("no_quality_score", lam, window=int(arg or 10))
        if arg:
            raise ValueError(f"exit mode {name!r} takes no argument")
        return cls(name, lam)

    def __str__(self) -> str:
        name = self.variant.replace("_", "-")
        if self.variant == "fixed_temp":
            return f"{name}:{'sqrtT' if self.tau is None else f'{self.tau:g}'}"
        if self.variant == "no_quality_score":
            return f"{name}:{self.window}"
        return name


@dataclass
class ExitState:
    active: list[ModelId]
    cumulative_quality: dict[int, float] = field(default_factory=dict)
    first_place_history: list[tuple[int, ModelId]] = field(default_factory=list)
    round: int = 0

    @classmethod
    def start(cls, models: Sequence[ModelId]) -> ExitState:
        if not models:
            raise ValueError("ensemble needs at least one model")
        return cls(active=sorted(models), cumulative_quality={m.index: 0.0 for m in models})

    def quality_of(self, models: Sequence[ModelId]) -> list[float]:
        return [self.cumulative_quality[m.index] for m in models]


def recency_weight(d: int) -> float:
    if d < 4:
        return 1.0
    if d < 8:
        return 0.75
    if d < 12:
        return 0.5
    return 0.25


def weighted_first_place_counts(
    history: Sequence[tuple[int, ModelId]], active: Sequence[ModelId], T: int
) -> list[float]:
    """Recency-weighted win counts, aligned with ``active``. Wins of exited models are ignored."""
    pos = {m.index: k for k, m in enumerate(active)}
    r = [0.0] * len(active)
    for rnd, winner in history:
        k = pos.get(winner.index)
        if k is not None:
            r[k] += recency_weight(T - rnd)
    return r


def normalize_counts(r: Sequence[float]) -> list[float]:
    total = math.fsum(r)
    if total <= 0:
        return [1.0 / len(r)] * len(r)
    return [x / total for x in r]


def normalized_entropy(dist: Sequence[float], n: int) -> float:
    """Shannon entropy divided by ``log n``, with ``0 log 0 = 0``."""
    if n < 2:
        raise ValueError("normalized entropy needs n >= 2")
    h = -math.fsum(p * math.log(p) for p in dist if p > 0)
    return min(1.0, max(0.0, h / math.log(n)))


def softmax_temperature(mode: ExitMode, H: float, T: int) -> float:
    if mode.variant == "full":
        return max(1.0, H * math.sqrt(T))
    if mode.variant == "no_entropy" or (mode.variant == "fixed_temp" and mode.tau is None):
        return max(1.0, math.sqrt(T))
    if mode.variant == "fixed_temp":
        return mode.tau
    raise ValueError(f"exit mode {mode} has no softmax temperature")


def softmax(values: Sequence[float], tau: float = 1.0) -> list[float]:
    scaled = [v / tau for v in values]
    top = max(scaled)
    e = [math.exp(v - top) for v in scaled]
    z = math.fsum(e)
    return [x / z for x in e]


def exit_probabilities(Q: Sequence[float], H: float, T: int, mode: ExitMode) -> list[float]:
    """Survival probability of each active model from its cumulative quality."""
    if mode.variant in ("off", "no_quality_score"):
        raise ValueError(f"exit mode {mode} does not use survival probabilities")
    return softmax(Q, softmax_temperature(mode, H, T))


def exit_threshold(lam: float, n: int) -> float:
    return lam / n


def apply_exit(
    p: Sequence[float], mode: ExitMode, active: Sequence[ModelId]
) -> tuple[list[ModelId], list[ModelId]]:
    """Drop every model with ``p < lambda / n`` at once; ``n`` is the current active count."""
    delta = exit_threshold(mode.lam, len(active))
    keep = [m for m, pi in zip(active, p) if not pi < delta]
    gone = [m for m, pi in zip(active, p) if pi < delta]
    if not keep:
        raise AssertionError("exit emptied the ensemble; lambda must be < 1")
    return keep, gone


def update_state(state: ExitState, quality: Sequence[float] | Mapping[int, float], winner: ModelId) -> ExitState:
    """Accumulate this round's quality (aligned with ``state.active``) and record the winner.

    The caller advances ``state.round`` before calling.
    """
    if isinstance(quality, Mapping):
        values = [quality[m.index] for m in state.active]
    else:
        values = list(quality)
    if len(values) != len(state.active):
        raise ValueError("quality vector does not match the active set")
    for m, q in zip(state.active, values):
        state.cumulative_quality[m.index] += q
    if state.first_place_history and state.first_place_history[-1][0] >= state.round:
        raise ValueError("history rounds must strictly increase")
    state.first_place_history.append((state.round, winner))
    return state


def no_quality_score_exit(
    history: Sequence[tuple[int, ModelId]], T: int, n_window: int, active: Sequence[ModelId]
) -> list[ModelId]:
    """Window ablation: at round ``n_window`` drop every model without a win so far."""
    if T != n_window:
        return list(active)
    winners = {w.index for rnd, w in history if rnd <= n_window}
    keep = [m for m in active if m.index in winners]
    return keep or list(active)


@dataclass(frozen=True)
class ExitDecision:
    exited: tuple[ModelId, ...]
    counts: tuple[float, ...] = ()
    entropy: float | None = None
    temperature: float | None = None
    probabilities: tuple[float, ...] = ()
    threshold: float | None = None


def run_exit_check(state: ExitState, mode: ExitMode) -> ExitDecision:
    """Apply ``mode`` to ``state`` in place and report what happened."""
    active = state.active
    if mode.variant == "off" or len(active) < 2:
        return ExitDecision(())
    T = state.round
    if mode.variant == "no_quality_score":
        keep = no_quality_score_exit(state.first_place_history, T, mode.window, active)
        gone = tuple(m for m in active if m not in keep)
        state.active = keep
        return ExitDecision(gone)

    r = weighted_first_place_counts(state.first_place_history, active, T)
    H = normalized_entropy(normalize_counts(r), len(active))
    tau = softmax_temperature(mode, H, T)
    p = softmax(state.quality_of(active), tau)
    keep, gone = apply_exit(p, mode, active)
    state.active = keep
    return ExitDecision(tuple(gone), tuple(r), H, tau, tuple(p), exit_threshold(mode.lam, len(active)))
