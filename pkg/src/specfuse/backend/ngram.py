"""Seedable n-gram toy language model and the backend that serves it.

Tokenization is whitespace splitting. The vocabulary is closed: every token
seen in training plus the end-of-sequence marker, which is always the last
id. Histories are left-padded with a begin marker that is never predicted.
"""

from __future__ import annotations

import random
import threading
from array import array
from collections import OrderedDict, defaultdict
from typing import Iterable, Sequence

from .. import kernels
from ..types import Candidate, ModelId, SamplingParams, ScoreItem, SequenceScore, mean_prob
from .base import Backend, InvalidInput

EOS = "</s>"
BOS_ID = -1
UNK_ID = -2
MAX_ORDER = 5


class NGramModel:
    """Count tables plus additive smoothing.

    ``P(t | h) = (count(h, t) + k) / (count(h) + k * |V|)`` with ``h`` the
    last ``order - 1`` ids. A history with no mass at all (unseen and
    ``k == 0``) falls back to the uniform distribution.
    """

    def __init__(self, order: int, smoothing: float, vocab: Sequence[str], counts: dict):
        self.order = order
        self.smoothing = float(smoothing)
        self.vocab = tuple(vocab)
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        self.eos_id = self.index[EOS]
        self.counts = counts
        self._tables = {}
        for hist, nxt in counts.items():
            ids = sorted(nxt)
            self._tables[hist] = (
                float(sum(nxt[i] for i in ids)),
                array("q", ids),
                array("d", [float(nxt[i]) for i in ids]),
            )
        self._empty = (0.0, array("q"), array("d"))

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def history(self, ids: Sequence[int]) -> tuple[int, ...]:
        n = self.order - 1
        if n == 0:
            return ()
        tail = tuple(ids[-n:])
        if len(tail) < n:
            tail = (BOS_ID,) * (n - len(tail)) + tail
        return tail

    def distribution(self, history: tuple[int, ...]):
        total, ids, counts = self._tables.get(history, self._empty)
        return kernels.dense_probs(self.vocab_size, total, self.smoothing, ids, counts)

    def prob(self, history: tuple[int, ...], token_id: int) -> float:
        # same arithmetic as dense_probs so both paths agree bit for bit
        total, _, _ = self._tables.get(history, self._empty)
        denom = total + self.smoothing * self.vocab_size
        if denom <= 0:
            return 1.0 / self.vocab_size
        c = float(self.counts.get(history, {}).get(token_id, 0.0))
        return (c + self.smoothing) / denom

    def conditional(self, token: str, context: str = "") -> float:
        """``P(token | context)`` with string arguments, for inspection."""
        ids = self.encode(context.split())
        tid = self.index.get(token)
        if tid is None:
            return 0.0
        return self.prob(self.history(ids), tid)

    def sequence_probs(self, context_ids: Sequence[int], token_ids: Sequence[int]) -> list[float]:
        ids = list(context_ids)
        out = []
        for t in token_ids:
            out.append(self.prob(self.history(ids), t))
            ids.append(t)
        return out

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "smoothing": self.smoothing,
            "vocab": list(self.vocab),
            "counts": [[list(h), {str(t): c for t, c in sorted(nxt.items())}] for h, nxt in sorted(self.counts.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> NGramModel:
        counts = {tuple(h): {int(t): float(c) for t, c in nxt.items()} for h, nxt in data["counts"]}
        return cls(data["order"], data["smoothing"], data["vocab"], counts)


def ngram_train(
    corpus: Sequence[str],
    order: int,
    smoothing: float = 1.0,
    weights: Sequence[float] | None = None,
) -> NGramModel:
    """Count n-grams over whitespace-tokenized sentences.

    Each string is one sentence terminated by the end marker. ``weights``
    scales each sentence's counts (default 1).
    """
    if not corpus:
        raise InvalidInput("corpus is empty")
    if not 1 <= order <= MAX_ORDER:
        raise InvalidInput(f"order must be in 1..{MAX_ORDER}, got {order}")
    if smoothing < 0:
        raise InvalidInput("smoothing must be >= 0")
    if weights is not None and len(weights) != len(corpus):
        raise InvalidInput("weights must align with corpus")

    vocab: dict[str, None] = {}
    sentences = []
    for line in corpus:
        toks = line.split()
        if EOS in toks:
            raise InvalidInput(f"corpus may not contain the reserved token {EOS!r}")
        for t in toks:
            vocab.setdefault(t, None)
        sentences.append(toks)
    vocab_list = list(vocab) + [EOS]
    index = {t: i for i, t in enumerate(vocab_list)}

    counts: dict[tuple[int, ...], dict[int, float]] = defaultdict(lambda: defaultdict(float))
    n = order - 1
    for k, toks in enumerate(sentences):
        w = 1.0 if weights is None else float(weights[k])
        ids = [BOS_ID] * n + [index[t] for t in toks] + [index[EOS]]
        for pos in range(n, len(ids)):
            counts[tuple(ids[pos - n:pos])][ids[pos]] += w
    frozen = {h: dict(nxt) for h, nxt in counts.items()}
    return NGramModel(order, smoothing, vocab_list, frozen)


class NGramBackend(Backend):
    """Serves an :class:`NGramModel` through the backend contract.

    Emitted text puts a single space before each token (omitted for the first
    token when the context already ends in whitespace), so appending it to
    the context keeps whitespace tokenization intact.
    """

    def __init__(self, model: NGramModel, model_id: ModelId, max_sessions: int = 4096):
        self.ngram = model
        self.model = model_id
        self.max_sessions = max_sessions
        self._sessions: OrderedDict[str, tuple[str, list[int]]] = OrderedDict()
        self._lock = threading.Lock()

    def _context_ids(self, session: str, context: str) -> list[int]:
        with self._lock:
            cached = self._sessions.get(session)
        if cached is not None:
            prev, prev_ids = cached
            if context == prev:
                ids = list(prev_ids)
            elif context.startswith(prev) and (
                not prev or prev[-1].isspace() or context[len(prev)].isspace()
            ):
                ids = prev_ids + self.ngram.encode(context[len(prev):].split())
            else:
                ids = self.ngram.encode(context.split())
        else:
            ids = self.ngram.encode(context.split())
        with self._lock:
            self._sessions[session] = (context, ids)
            self._sessions.move_to_end(session)
            while len(self._sessions) > self.max_sessions:
                self._sessions.popitem(last=False)
        return list(ids)

    def generate(self, session, context, max_new_tokens, params: SamplingParams) -> Candidate:
        if max_new_tokens < 1:
            raise InvalidInput("max_new_tokens must be >= 1")
        if not context:
            raise InvalidInput("n-gram backend needs a nonempty context")
        ids = self._context_ids(session, context)
        rng = random.Random(params.seed)
        probs: list[float] = []
        pieces: list[str] = []
        finished = False
        sep = "" if context[-1].isspace() else " "
        for _ in range(max_new_tokens):
            dist = self.ngram.distribution(self.ngram.history(ids))
            tok, p = kernels.pick_token(dist, params.temperature, params.top_p, rng.random(), params.do_sample)
            probs.append(float(p))
            if tok == self.ngram.eos_id:
                finished = True
                break
            pieces.append(sep + self.ngram.vocab[tok])
            sep = " "
            ids.append(tok)
        return Candidate(self.model, "".join(pieces), tuple(probs), finished)

    def score_batch(self, session, items: Sequence[ScoreItem]) -> list[SequenceScore]:
        out = []
        for item in items:
            toks = item.continuation.split()
            if not toks and not item.finished:
                raise InvalidInput("continuation must be nonempty")
            cont = self.ngram.encode(toks)
            if UNK_ID in cont:
                out.append(SequenceScore(0.0, 1))
                continue
            if item.finished:
                cont.append(self.ngram.eos_id)
            ctx = self._context_ids(session, item.context)
            probs = self.ngram.sequence_probs(ctx, cont)
            out.append(SequenceScore(mean_prob(probs), len(probs)))
        return out

    def close_session(self, session: str) -> None:
        with self._lock:
            self._sessions.pop(session, None)
