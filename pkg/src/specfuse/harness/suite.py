"""Synthetic expert suites: disjoint token families, one expert model each.

Every family is a sparse random Markov chain over its own tokens. Expert
``f`` is trained mostly on family ``f`` documents with a light sprinkling of
the others, so its vocabulary covers everything but its mass sits on one
family. Filler models are smoothed unigram models of uniform noise over the
whole vocabulary: they know the words and nothing else. The
reference model, used only for evaluation, sees every family's training
documents.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from ..backend.ngram import NGramBackend, NGramModel, ngram_train
from ..types import ModelId


@dataclass(frozen=True)
class SuitePrompt:
    prompt: str
    expert: int
    family: str


@dataclass
class SyntheticSuite:
    prompts: list[SuitePrompt]
    models: list[NGramModel]
    model_names: list[str]
    reference_model: NGramModel
    heldout: dict[str, list[str]]
    seed: int
    n_families: int

    def backends(self, subset: list[int] | None = None) -> list[NGramBackend]:
        idx = range(len(self.models)) if subset is None else subset
        return [NGramBackend(self.models[i], ModelId(i, self.model_names[i])) for i in idx]

    def family_prompts(self, family: str) -> list[SuitePrompt]:
        return [p for p in self.prompts if p.family == family]

    def reference_logprob(self, prompt: str, response: str) -> float:
        """Mean per-token natural-log probability of ``response`` given ``prompt``."""
        ref = self.reference_model
        toks = ref.encode(response.split())
        if not toks:
            return 0.0
        probs = ref.sequence_probs(ref.encode(prompt.split()), toks)
        return math.fsum(math.log(max(p, 1e-12)) for p in probs) / len(probs)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_families": self.n_families,
            "prompts": [[p.prompt, p.expert, p.family] for p in self.prompts],
            "model_names": self.model_names,
            "models": [m.to_dict() for m in self.models],
            "reference_model": self.reference_model.to_dict(),
            "heldout": self.heldout,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> SyntheticSuite:
        return cls(
            prompts=[SuitePrompt(p, int(e), f) for p, e, f in data["prompts"]],
            models=[NGramModel.from_dict(m) for m in data["models"]],
            model_names=list(data["model_names"]),
            reference_model=NGramModel.from_dict(data["reference_model"]),
            heldout={k: list(v) for k, v in data["heldout"].items()},
            seed=int(data["seed"]),
            n_families=int(data["n_families"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> SyntheticSuite:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _family_chain(rng: random.Random, tokens: list[str], fanout: int) -> dict[str, list[tuple[str, float]]]:
    chain = {}
    for t in tokens:
        succ = rng.sample(tokens, fanout)
        weights = [rng.random() + 0.2 for _ in succ]
        chain[t] = list(zip(succ, weights))
    return chain


def _walk(rng: random.Random, chain, tokens: list[str], length: int) -> str:
    cur = rng.choice(tokens)
    out = [cur]
    for _ in range(length - 1):
        succ, weights = zip(*chain[cur])
        cur = rng.choices(succ, weights)[0]
        out.append(cur)
    return " ".join(out)


def synth_suite(
    seed: int,
    n_models: int,
    family_size: int,
    n_fillers: int = 0,
    vocab_per_family: int = 24,
    fanout: int = 3,
    doc_len: tuple[int, int] = (60, 120),
    train_docs: int = 40,
    prompt_len: int = 3,
    order: int = 3,
    smoothing: float = 0.01,
    light_weight: float = 0.05,
) -> SyntheticSuite:
    """Build a seed-deterministic suite with ``n_models`` families and experts.

    ``n_fillers`` extra noise models are appended after the experts; they
    are never the labeled expert for any prompt.
    """
    if n_models < 2:
        raise ValueError("a suite needs at least two expert models")
    if family_size < 1:
        raise ValueError("family_size must be >= 1")
    rng = random.Random(seed)
    families = [f"f{k}" for k in range(n_models)]
    vocab = {f: [f"{f}w{j}" for j in range(vocab_per_family)] for f in families}
    chains = {f: _family_chain(rng, vocab[f], fanout) for f in families}

    train = {f: [_walk(rng, chains[f], vocab[f], rng.randint(*doc_len)) for _ in range(train_docs)] for f in families}
    heldout = {f: [_walk(rng, chains[f], vocab[f], rng.randint(*doc_len)) for _ in range(family_size)] for f in families}

    # same unigram statistics as the real documents, none of the transitions
    shuffled = {f: [" ".join(rng.sample(d.split(), len(d.split()))) for d in train[f]] for f in families}

    models, names = [], []
    for k, f in enumerate(families):
        corpus, weights = [], []
        for g in families:
            corpus += train[g] if g == f else shuffled[g]
            weights += [1.0 if g == f else light_weight] * len(train[g])
        models.append(ngram_train(corpus, order, smoothing, weights))
        names.append(f"expert-{f}")

    all_tokens = [t for f in families for t in vocab[f]]
    for k in range(n_fillers):
        noise = [" ".join(rng.choices(all_tokens, k=rng.randint(*doc_len))) for _ in range(train_docs)]
        models.append(ngram_train(noise, 1, 1.0))
        names.append(f"filler-{k}")

    reference = ngram_train([d for f in families for d in train[f]], order, smoothing)
    prompts = [
        SuitePrompt(" ".join(doc.split()[:prompt_len]), k, f)
        for k, f in enumerate(families)
        for doc in heldout[f]
    ]
    return SyntheticSuite(prompts, models, names, reference, heldout, seed, n_models)


def parse_synth_spec(text: str) -> dict:
    """``seed=N,models=K,family=M[,fillers=F]`` -> keyword arguments for :func:`synth_suite`."""
    keys = {"seed": "seed", "models": "n_models", "family": "family_size", "fillers": "n_fillers"}
    out = {}
    for part in filter(None, text.split(",")):
        k, _, v = part.partition("=")
        if k.strip() not in keys:
            raise ValueError(f"unknown synth key {k!r}")
        out[keys[k.strip()]] = int(v)
    missing = {"seed", "n_models", "family_size"} - out.keys()
    if missing:
        raise ValueError(f"synth spec missing {sorted(missing)}")
    return out
