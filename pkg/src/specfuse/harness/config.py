"""Ensemble config files.

::

    {"models": [{"type": "ngram" | "http" | "scripted", "name": "...", "params": {...}}],
     "defaults": {"L": 10, "temperature": 0.6, "top_p": 0.9, "do_sample": true,
                  "exit_mode": "full", "lambda": 0.5, "seed": 0,
                  "max_rounds": 256, "max_tokens": 2048}}

``ngram`` params: ``corpus`` (list of sentences) or ``corpus_file`` (one per
line) or ``model_file`` (serialized model), plus ``order`` and
``smoothing``. ``http`` params: ``url``, ``timeout``, ``retries``.
``scripted`` params: ``segments``, ``scores``, ``default_score``.
Per-model ``temperature``/``top_p`` override the shared sampling settings.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..backend import HttpBackend, NGramBackend, NGramModel, ScriptedBackend, ngram_train
from ..backend.base import Backend, BackendError
from ..engine import EnsembleConfig
from ..exit import ExitMode
from ..types import ModelId, SamplingParams


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "L": 10,
    "temperature": 0.6,
    "top_p": 0.9,
    "do_sample": True,
    "exit_mode": "full",
    "lambda": 0.5,
    "seed": 0,
    "max_rounds": 256,
    "max_tokens": 2048,
}


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def build_backend(spec: dict, index: int, base_dir: Path = Path(".")) -> Backend:
    kind = spec.get("type")
    params = spec.get("params", {})
    mid = ModelId(index, spec.get("name") or f"{kind}{index}")
    try:
        if kind == "ngram":
            if "model_file" in params:
                model = NGramModel.from_dict(json.loads(_resolve(base_dir, params["model_file"]).read_text()))
            else:
                corpus = params.get("corpus")
                if corpus is None and "corpus_file" in params:
                    corpus = [ln for ln in _resolve(base_dir, params["corpus_file"]).read_text().splitlines() if ln.strip()]
                model = ngram_train(corpus or [], int(params.get("order", 3)), float(params.get("smoothing", 1.0)))
            return NGramBackend(model, mid)
        if kind == "http":
            return HttpBackend(mid, params["url"], float(params.get("timeout", 30.0)), int(params.get("retries", 2)))
        if kind == "scripted":
            return ScriptedBackend(
                mid,
                params["segments"],
                scores=params.get("scores"),
                default_score=float(params.get("default_score", 0.5)),
            )
    except (KeyError, TypeError, ValueError, OSError, BackendError) as exc:
        raise ConfigError(f"model {index} ({kind}): {exc}") from exc
    raise ConfigError(f"model {index}: unknown backend type {kind!r}")


def load_config(path: str | Path, overrides: dict | None = None) -> EnsembleConfig:
    """Read a config file; ``overrides`` (non-None values) win over its defaults."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw, overrides, path.parent)


def config_from_dict(raw: dict, overrides: dict | None = None, base_dir: Path = Path(".")) -> EnsembleConfig:
    models = raw.get("models") if isinstance(raw, dict) else None
    if not models:
        raise ConfigError("config needs a nonempty 'models' list")
    opts = dict(DEFAULTS)
    opts.update(raw.get("defaults", {}))
    opts.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(opts) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown default keys: {sorted(unknown)}")
    try:
        sampling = SamplingParams(float(opts["temperature"]), float(opts["top_p"]), int(opts["seed"]), bool(opts["do_sample"]))
        backends = [build_backend(spec, i, base_dir) for i, spec in enumerate(models)]
        per_model = {}
        for i, spec in enumerate(models):
            p = spec.get("params", {})
            if "temperature" in p or "top_p" in p:
                per_model[i] = SamplingParams(
                    float(p.get("temperature", sampling.temperature)),
                    float(p.get("top_p", sampling.top_p)),
                    sampling.seed,
                    sampling.do_sample,
                )
        return EnsembleConfig(
            backends=backends,
            L=int(opts["L"]),
            sampling=sampling,
            exit_mode=ExitMode.parse(str(opts["exit_mode"]), float(opts["lambda"])),
            max_rounds=int(opts["max_rounds"]),
            max_total_tokens=int(opts["max_tokens"]),
            base_seed=int(opts["seed"]),
            per_model_sampling=per_model,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
