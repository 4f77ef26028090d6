"""Benchmark and sweep runners over a synthetic suite."""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ..engine import EnsembleConfig, QueryResult, run_query
from ..exit import ExitMode
from ..types import SamplingParams
from .suite import SuitePrompt, SyntheticSuite

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchConfig:
    """One ensemble setting to evaluate; ``models`` selects suite models by index."""

    name: str
    L: int = 10
    sampling: SamplingParams = field(default_factory=SamplingParams)
    exit_mode: ExitMode = field(default_factory=ExitMode)
    max_rounds: int = 24
    max_total_tokens: int = 240
    base_seed: int = 0
    models: tuple[int, ...] | None = None

    def ensemble(self, suite: SyntheticSuite, seed_offset: int = 0) -> EnsembleConfig:
        return EnsembleConfig(
            backends=suite.backends(None if self.models is None else list(self.models)),
            L=self.L,
            sampling=self.sampling,
            exit_mode=self.exit_mode,
            max_rounds=self.max_rounds,
            max_total_tokens=self.max_total_tokens,
            base_seed=self.base_seed + seed_offset,
            parallel=False,
        )

    @classmethod
    def from_dict(cls, data: dict) -> BenchConfig:
        lam = float(data.get("lambda", 0.5))
        sampling = SamplingParams(
            temperature=float(data.get("temperature", 0.6)),
            top_p=float(data.get("top_p", 0.9)),
            do_sample=bool(data.get("do_sample", True)),
        )
        models = data.get("models")
        return cls(
            name=str(data["name"]),
            L=int(data.get("L", data.get("max_segment_len", 10))),
            sampling=sampling,
            exit_mode=ExitMode.parse(str(data.get("exit_mode", "full")), lam),
            max_rounds=int(data.get("max_rounds", 24)),
            max_total_tokens=int(data.get("max_tokens", 240)),
            base_seed=int(data.get("seed", 0)),
            models=None if models is None else tuple(int(m) for m in models),
        )


@dataclass
class BenchRow:
    config: str
    models: str
    avg_active_models: float
    expert_agreement_rate: float
    mean_reference_logprob: float
    first_token_rounds: int
    wall_time: float
    queries: int
    failures: int
    avg_active_models_std: float = 0.0
    expert_agreement_rate_std: float = 0.0


@dataclass
class BenchmarkReport:
    rows: list[BenchRow]
    queries: list[dict] = field(default_factory=list)

    def row(self, name: str) -> BenchRow:
        return next(r for r in self.rows if r.config == name)

    def deterministic_view(self) -> list[dict]:
        """Rows without timing columns, for reproducibility checks."""
        return [{k: v for k, v in asdict(r).items() if k != "wall_time"} for r in self.rows]


@dataclass(frozen=True)
class _Outcome:
    prompt_index: int
    result: QueryResult | None
    error: str | None = None


def _run_one(suite: SyntheticSuite, cfg: BenchConfig, k: int, p: SuitePrompt, seed_offset: int) -> _Outcome:
    try:
        res = run_query(cfg.ensemble(suite, seed_offset), p.prompt, session_prefix=f"{cfg.name}/{seed_offset}/{k}")
    except Exception as exc:  # recorded per row, the run continues
        logger.exception("query %d under %s failed", k, cfg.name)
        return _Outcome(k, None, f"{type(exc).__name__}: {exc}")
    return _Outcome(k, res)


def _evaluate(suite: SyntheticSuite, cfg: BenchConfig, prompts: Sequence[SuitePrompt], outcomes: Sequence[_Outcome]):
    avg, logps, agree, rounds, failures = [], [], 0, 0, 0
    per_query = []
    for o in outcomes:
        p = prompts[o.prompt_index]
        if o.result is None:
            failures += 1
            per_query.append({"config": cfg.name, "prompt_index": o.prompt_index, "error": o.error})
            continue
        r = o.result
        if r.stop_reason == "all_backends_failed":
            failures += 1
        hits = sum(w.index == p.expert for w in r.winners)
        logp = suite.reference_logprob(p.prompt, r.text)
        avg.append(r.avg_active_models)
        logps.append(logp)
        agree += hits
        rounds += len(r.rounds)
        per_query.append({
            "config": cfg.name,
            "prompt_index": o.prompt_index,
            "family": p.family,
            "expert": p.expert,
            "stop_reason": r.stop_reason,
            "rounds": len(r.rounds),
            "avg_active_models": r.avg_active_models,
            "expert_wins": hits,
            "reference_logprob": logp,
            "winners": [w.index for w in r.winners],
        })
    return (
        statistics.fmean(avg) if avg else 0.0,
        agree / rounds if rounds else 0.0,
        statistics.fmean(logps) if logps else -math.inf,
        failures,
        per_query,
    )


def run_benchmark(
    suite: SyntheticSuite,
    configs: Sequence[BenchConfig],
    workers: int = 1,
    repeats: int = 1,
    prompts: Sequence[SuitePrompt] | None = None,
) -> BenchmarkReport:
    """Run every prompt under every config and aggregate one row per config.

    With ``repeats > 1`` each repeat shifts the base seed by its index; rows
    report the mean over repeats and the population standard deviation.
    """
    if not configs:
        raise ValueError("no configs to run")
    prompts = list(suite.prompts if prompts is None else prompts)
    rows, queries = [], []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cfg in configs:
            start = time.perf_counter()
            per_repeat = []
            for rep in range(repeats):
                jobs = [(suite, cfg, k, p, rep) for k, p in enumerate(prompts)]
                if pool is None:
                    outcomes = [_run_one(*j) for j in jobs]
                else:
                    outcomes = [f.result() for f in [pool.submit(_run_one, *j) for j in jobs]]
                avg, agree, logp, failures, per_query = _evaluate(suite, cfg, prompts, outcomes)
                for q in per_query:
                    q["repeat"] = rep
                queries.extend(per_query)
                per_repeat.append((avg, agree, logp, failures))
            avgs, agrees, logps, fails = zip(*per_repeat)
            rows.append(BenchRow(
                config=cfg.name,
                models="all" if cfg.models is None else ",".join(map(str, cfg.models)),
                avg_active_models=statistics.fmean(avgs),
                expert_agreement_rate=statistics.fmean(agrees),
                mean_reference_logprob=statistics.fmean(logps),
                first_token_rounds=1,
                wall_time=time.perf_counter() - start,
                queries=len(prompts) * repeats,
                failures=sum(fails),
                avg_active_models_std=statistics.pstdev(avgs),
                expert_agreement_rate_std=statistics.pstdev(agrees),
            ))
            logger.info("%s: avg models %.4f, agreement %.4f", cfg.name, rows[-1].avg_active_models, rows[-1].expert_agreement_rate)
    finally:
        if pool is not None:
            pool.shutdown()
    return BenchmarkReport(rows, queries)


def sweep_models(
    suite: SyntheticSuite,
    orderings: Sequence[Sequence[int]],
    base: BenchConfig,
    sizes: Sequence[int] | None = None,
    **kwargs,
) -> BenchmarkReport:
    """One row per ensemble size: the first ``s`` models of each ordering."""
    configs = []
    for k, order in enumerate(orderings):
        for s in sizes or range(1, len(order) + 1):
            if not 1 <= s <= len(order):
                raise ValueError(f"size {s} outside ordering {list(order)}")
            configs.append(replace(base, name=f"order{k}/size{s}", models=tuple(order[:s])))
    return run_benchmark(suite, configs, **kwargs)


def sweep_segment_len(suite: SyntheticSuite, values: Sequence[int], base: BenchConfig, **kwargs) -> BenchmarkReport:
    configs = [replace(base, name=f"L={v}", L=int(v)) for v in values]
    return run_benchmark(suite, configs, **kwargs)


def write_report(report: BenchmarkReport, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (rows) and ``<stem>.ndjson`` (rows, then per-query records)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, nd_path = out / f"{stem}.csv", out / f"{stem}.ndjson"
    fields = list(asdict(report.rows[0]).keys()) if report.rows else []
    with csv_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in report.rows:
            w.writerow(asdict(r))
    with nd_path.open("w") as fh:
        for r in report.rows:
            fh.write(json.dumps({"type": "row", **asdict(r)}) + "\n")
        for q in report.queries:
            fh.write(json.dumps({"type": "query", **q}) + "\n")
    return csv_path, nd_path


ABLATION_MODES = (
    ("no-exit", "off"),
    ("full", "full"),
    ("no-entropy", "no-entropy"),
    ("no-quality-score:5", "no-quality-score:5"),
    ("no-quality-score:10", "no-quality-score:10"),
    ("no-quality-score:15", "no-quality-score:15"),
    ("tau=1", "fixed-temp:1"),
    ("tau=sqrtT", "fixed-temp:sqrtT"),
)


def ablation_configs(base: BenchConfig | None = None) -> list[BenchConfig]:
    """The exit-mechanism ablation grid, one config per variant."""
    base = base or BenchConfig("base")
    return [replace(base, name=name, exit_mode=ExitMode.parse(mode, base.exit_mode.lam)) for name, mode in ABLATION_MODES]
