#!/usr/bin/env python
"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--vocab 80] [--queries 30]

Reports microbenchmarks for the two kernels and end-to-end query
throughput on a synthetic expert suite. Results are checked for equality
between the two paths before any timing is printed.
"""

import argparse
import random
import time
from array import array

from specfuse import EnsembleConfig, ExitMode, kernels, run_query
from specfuse.harness import synth_suite


def timeit(fn, min_time=0.5):
    n, start = 0, time.perf_counter()
    while True:
        fn()
        n += 1
        elapsed = time.perf_counter() - start
        if elapsed >= min_time:
            return elapsed / n


def micro(vocab):
    rng = random.Random(0)
    ids = array("q", sorted(rng.sample(range(vocab), vocab // 4)))
    counts = array("d", [float(rng.randint(1, 20)) for _ in ids])
    total = sum(counts)
    out = {}
    for name, impl in (("python", kernels.fallback), ("cython", kernels.compiled)):
        if impl is None:
            continue
        dense = array("d", impl.dense_probs(vocab, total, 0.01, ids, counts))
        out[name] = (
            timeit(lambda: impl.dense_probs(vocab, total, 0.01, ids, counts)),
            timeit(lambda: impl.pick_token(dense, 0.6, 0.9, 0.37, True)),
        )
    return out


def queries(n):
    suite = synth_suite(0, 3, max(1, n // 3), n_fillers=2)
    prompts = [p.prompt for p in suite.prompts[:n]]
    texts, times = {}, {}
    for name in ("python", "cython"):
        if name == "cython" and kernels.compiled is None:
            continue
        kernels.use(name)
        cfg = EnsembleConfig(suite.backends(), exit_mode=ExitMode("off"), max_rounds=24, max_total_tokens=240, parallel=False)
        start = time.perf_counter()
        texts[name] = [run_query(cfg, p).text for p in prompts]
        times[name] = time.perf_counter() - start
    if len(texts) == 2:
        assert texts["python"] == texts["cython"], "kernel paths disagree"
    return times


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vocab", type=int, default=80)
    ap.add_argument("--queries", type=int, default=30)
    args = ap.parse_args()

    print(f"kernel selected at import: {kernels.BACKEND}")
    print(f"\nmicrobenchmarks, |V| = {args.vocab} (us per call)")
    print(f"{'impl':<8} {'dense_probs':>12} {'pick_token':>12}")
    res = micro(args.vocab)
    for name, (d, p) in res.items():
        print(f"{name:<8} {d * 1e6:>12.2f} {p * 1e6:>12.2f}")
    if len(res) == 2:
        print(f"{'speedup':<8} {res['python'][0] / res['cython'][0]:>11.1f}x {res['python'][1] / res['cython'][1]:>11.1f}x")

    print(f"\nend to end: {args.queries} queries, 5 models, exit off")
    times = queries(args.queries)
    for name, t in times.items():
        print(f"{name:<8} {t:>8.2f} s  ({args.queries / t:.1f} queries/s)")
    if len(times) == 2:
        print(f"speedup  {times['python'] / times['cython']:.2f}x")


if __name__ == "__main__":
    main()
