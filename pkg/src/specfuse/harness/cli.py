"""``specfuse`` command line: run, bench, sweep, synth, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..engine import NdjsonSink, QueryAborted, TextSink, run_query
from ..exit import ExitMode
from ..types import SamplingParams
from .bench import BenchConfig, ablation_configs, run_benchmark, sweep_models, sweep_segment_len, write_report
from .config import ConfigError, load_config
from .suite import SyntheticSuite, parse_synth_spec, synth_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-segment-len", "-L", type=int, dest="L")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--exit-mode", help="full|off|no-entropy|fixed-temp:1|fixed-temp:sqrtT|no-quality-score:N")
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-p", type=float)
    p.add_argument("--greedy", action="store_true", help="disable sampling")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--max-tokens", type=int)


def _add_suite(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--suite", type=Path, help="suite JSON written by 'specfuse synth'")
    g.add_argument("--synth", help="seed=N,models=K,family=M[,fillers=F]")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specfuse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate one response with live streaming")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--prompt", required=True)
    run.add_argument("--stream", choices=("text", "events"), default="text")
    _add_overrides(run)

    bench = sub.add_parser("bench", help="run configs over a synthetic suite")
    _add_suite(bench)
    bench.add_argument("--configs", type=Path, help="JSON list of bench configs (default: exit ablation grid)")
    _add_overrides(bench)

    sweep = sub.add_parser("sweep", help="sweep ensemble size or segment length")
    sweep.add_argument("--axis", choices=("models", "segment-len"), required=True)
    sweep.add_argument("--values", type=_int_list, required=True)
    sweep.add_argument("--order", type=_int_list, help="model addition order for --axis models")
    _add_suite(sweep)
    _add_overrides(sweep)

    synth = sub.add_parser("synth", help="write a synthetic suite file")
    synth.add_argument("--synth", required=True, help="seed=N,models=K,family=M[,fillers=F]")
    synth.add_argument("--out", type=Path, required=True)

    serve = sub.add_parser("serve", help="serve one configured model over HTTP")
    serve.add_argument("--config", type=Path, required=True)
    serve.add_argument("--model", type=int, default=0)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _overrides(args) -> dict:
    return {
        "L": args.L,
        "lambda": args.lam,
        "exit_mode": args.exit_mode,
        "temperature": args.temperature,
        "top_p": args.top_p,
        "do_sample": False if args.greedy else None,
        "seed": args.seed,
        "max_rounds": args.max_rounds,
        "max_tokens": args.max_tokens,
    }


def _base_bench_config(args, name: str = "base") -> BenchConfig:
    o = {k: v for k, v in _overrides(args).items() if v is not None}
    base = BenchConfig(name)
    lam = float(o.get("lambda", 0.5))
    return replace(
        base,
        L=o.get("L", base.L),
        sampling=SamplingParams(o.get("temperature", 0.6), o.get("top_p", 0.9), 0, o.get("do_sample", True)),
        exit_mode=ExitMode.parse(o.get("exit_mode", "full"), lam),
        max_rounds=o.get("max_rounds", base.max_rounds),
        max_total_tokens=o.get("max_tokens", base.max_total_tokens),
        base_seed=o.get("seed", 0),
    )


def _load_suite(args) -> SyntheticSuite:
    if args.suite is not None:
        return SyntheticSuite.load(args.suite)
    return synth_suite(**parse_synth_spec(args.synth))


def cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    sink = NdjsonSink(sys.stdout) if args.stream == "events" else TextSink(sys.stdout, args.prompt)
    try:
        result = run_query(config, args.prompt, sink)
    except QueryAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    return EXIT_ALL_FAILED if result.stop_reason == "all_backends_failed" else EXIT_OK


def cmd_bench(args) -> int:
    suite = _load_suite(args)
    base = _base_bench_config(args)
    if args.configs:
        try:
            raw = json.loads(args.configs.read_text())
            raw = raw["configs"] if isinstance(raw, dict) else raw
            configs = [BenchConfig.from_dict(c) for c in raw]
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad configs file: {exc}") from exc
    else:
        configs = ablation_configs(base)
    report = run_benchmark(suite, configs, workers=args.workers, repeats=args.repeats)
    paths = write_report(report, args.out, "bench")
    _print_rows(report)
    print(f"wrote {paths[0]} and {paths[1]}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    suite = _load_suite(args)
    base = _base_bench_config(args)
    if args.axis == "models":
        order = args.order or list(range(len(suite.models)))
        report = sweep_models(suite, [order], base, sizes=args.values, workers=args.workers, repeats=args.repeats)
    else:
        report = sweep_segment_len(suite, args.values, base, workers=args.workers, repeats=args.repeats)
    paths = write_report(report, args.out, f"sweep-{args.axis}")
    _print_rows(report)
    print(f"wrote {paths[0]} and {paths[1]}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    suite = synth_suite(**parse_synth_spec(args.synth))
    suite.save(args.out)
    print(f"wrote {args.out}: {len(suite.models)} models, {len(suite.prompts)} prompts", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from ..backend import serve_backend

    config = load_config(args.config)
    backend = next((b for b in config.backends if b.model.index == args.model), None)
    if backend is None:
        raise ConfigError(f"no model with index {args.model}")
    server = serve_backend(backend, args.host, args.port, background=False)
    print(f"serving {backend.model} on http://{args.host}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _print_rows(report) -> None:
    print(f"{'config':<24} {'models':>8} {'avg_models':>10} {'agreement':>9} {'ref_logp':>9} {'wall_s':>7}")
    for r in report.rows:
        print(f"{r.config:<24} {r.models:>8} {r.avg_active_models:>10.4f} {r.expert_agreement_rate:>9.4f} "
              f"{r.mean_reference_logprob:>9.4f} {r.wall_time:>7.2f}")


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "sweep": cmd_sweep, "synth": cmd_synth, "serve": cmd_serve}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
