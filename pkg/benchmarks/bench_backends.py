#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Kernel micro-benchmarks run both backends in-process; the end-to-end
simulation comparison spawns subprocesses so each run binds its backend
at import time.

    python benchmarks/bench_backends.py [--events 200000] [--no-sim]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from rainsketch import _pykernels
from rainsketch.hashing import mix64

try:
    from rainsketch import _ckernels
except ImportError:
    _ckernels = None

SENTINEL = np.uint64(2**64 - 1)


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def kernel_benchmarks(events: int):
    k, width = 64, 64
    ids = [b"bench-%d" % i for i in range(events)]
    seeds = np.array([mix64(s) for s in range(k)], dtype=np.uint64)
    digests = np.empty(events, dtype=np.uint64)
    _pykernels.digest_many(ids, digests)
    ts = np.arange(events, dtype=np.uint64)

    def bench_digest(mod):
        out = np.empty(events, dtype=np.uint64)
        return lambda: mod.digest_many(ids, out)

    def bench_insert_bulk(mod):
        slots = np.full((k, width), SENTINEL, dtype=np.uint64)
        return lambda: mod.rank_insert_bulk(slots, seeds, digests, ts)

    def bench_insert_one(mod):
        slots = np.full((k, width), SENTINEL, dtype=np.uint64)
        sample = [int(d) for d in digests[:5000]]

        def run():
            for i, digest in enumerate(sample):
                mod.rank_insert_one(slots, seeds, digest, i)

        return run

    def bench_fm_bulk(mod):
        masks = np.zeros(k, dtype=np.uint64)
        return lambda: mod.fm_or_bulk(digests, seeds, width, masks)

    def bench_threshold(mod):
        slots = np.full((k, width), SENTINEL, dtype=np.uint64)
        mod.rank_insert_bulk(slots, seeds, digests, ts)
        out = np.empty(k, dtype=np.int64)

        def run():
            for x in range(0, events, max(1, events // 2000)):
                mod.lsb0_at_most_into(slots, x, out)

        return run

    cases = [
        (f"digest_many ({events} ids)", bench_digest),
        (f"rank_insert_bulk ({events} events, K=64)", bench_insert_bulk),
        ("rank_insert_one (5000 events, K=64)", bench_insert_one),
        (f"fm_or_bulk ({events} events, K=64)", bench_fm_bulk),
        ("lsb0_at_most (2000 queries, K=64)", bench_threshold),
    ]

    print(f"{'kernel':45s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, make in cases:
        py = timeit(make(_pykernels))
        if _ckernels is None:
            print(f"{name:45s} {py * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")
        else:
            cy = timeit(make(_ckernels))
            print(f"{name:45s} {py * 1e3:9.2f}ms {cy * 1e3:9.2f}ms {py / cy:7.1f}x")


def sim_benchmark():
    code = (
        "import time, rainsketch; from rainsketch.sim import SimConfig, run_simulation\n"
        "t = time.perf_counter()\n"
        "run_simulation(SimConfig(duration_ticks=20000))\n"
        "print(f'{rainsketch.backend_name()} {time.perf_counter() - t:.3f}')\n"
    )
    print(f"\n{'end-to-end simulate (20000 ticks)':45s}")
    for backend in ("python", "compiled"):
        if backend == "compiled" and _ckernels is None:
            print(f"  {backend:10s} unavailable")
            continue
        env = dict(os.environ, RAINSKETCH_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        if out.returncode:
            print(f"  {backend:10s} failed: {out.stderr.strip()}")
        else:
            name, elapsed = out.stdout.split()
            print(f"  {name:10s} {float(elapsed) * 1e3:9.0f}ms")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--no-sim", action="store_true")
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled kernels not available; showing python backend only\n")
    kernel_benchmarks(args.events)
    if not args.no_sim:
        sim_benchmark()


if __name__ == "__main__":
    main()
