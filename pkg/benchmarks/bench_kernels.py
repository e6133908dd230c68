#!/usr/bin/env python3
"""Benchmark the numba kernels against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--items 20000] [--features 300] [--repeat 50]

Runs each kernel on a random catalog with both backends, checks the outputs
are identical, and prints timings. The end-to-end section times a full
simulation under each backend via ``CONVOSIM_NUMBA`` in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

from convosim import _kernels


def random_catalog(n_items, n_features, max_len, rng):
    lengths = rng.integers(1, max_len + 1, size=n_items)
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    indices = np.concatenate(
        [np.sort(rng.choice(n_features, size=n, replace=False)) for n in lengths]
    ).astype(np.int64)
    return indptr, indices


def timeit(fn, repeat):
    fn()  # warm-up (JIT compile for numba)
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_kernels(n_items, n_features, repeat):
    rng = np.random.default_rng(0)
    indptr, indices = random_catalog(n_items, n_features, 8, rng)
    weights = rng.random(n_features)
    rows = np.sort(rng.choice(n_items, size=min(50, n_items), replace=False)).astype(np.int64)

    print(f"\n=== item_scores ({n_items:,} items, {n_features} features) ===")
    a = _kernels.item_scores_numpy(indptr, indices, weights)
    b = _kernels.item_scores_numba(indptr, indices, weights)
    assert np.array_equal(a, b)
    t_np = timeit(lambda: _kernels.item_scores_numpy(indptr, indices, weights), repeat)
    t_nb = timeit(lambda: _kernels.item_scores_numba(indptr, indices, weights), repeat)
    print(f"numpy: {t_np * 1e6:9.1f} us   numba: {t_nb * 1e6:9.1f} us   speedup {t_np / t_nb:5.1f}x")

    print(f"\n=== feature_counts ({len(rows)} candidate rows) ===")
    a = _kernels.feature_counts_numpy(indptr, indices, rows, n_features)
    b = _kernels.feature_counts_numba(indptr, indices, rows, n_features)
    assert np.array_equal(a, b)
    t_np = timeit(lambda: _kernels.feature_counts_numpy(indptr, indices, rows, n_features), repeat)
    t_nb = timeit(lambda: _kernels.feature_counts_numba(indptr, indices, rows, n_features), repeat)
    print(f"numpy: {t_np * 1e6:9.1f} us   numba: {t_nb * 1e6:9.1f} us   speedup {t_np / t_nb:5.1f}x")


def bench_end_to_end(users, items, features):
    print(f"\n=== end-to-end run ({users} users, {items} items, {features} features) ===")
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "convosim.cli", "gen-synth", "--users", str(users),
                        "--items", str(items), "--features", str(features), "--out-dir", tmp],
                       check=True, capture_output=True)
        reports = {}
        for flag in ("0", "1"):
            out = os.path.join(tmp, f"out{flag}")
            env = dict(os.environ, CONVOSIM_NUMBA=flag)
            start = time.perf_counter()
            subprocess.run([sys.executable, "-m", "convosim.cli", "run",
                            "--ratings", os.path.join(tmp, "ratings.csv"),
                            "--items", os.path.join(tmp, "items.csv"), "--out-dir", out],
                           check=True, capture_output=True, env=env)
            elapsed = time.perf_counter() - start
            reports[flag] = open(os.path.join(out, "report.json"), "rb").read()
            print(f"{'numba' if flag == '1' else 'numpy'}: {elapsed:6.2f} s (includes interpreter start-up)")
        print("reports identical:", reports["0"] == reports["1"])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--items", type=int, default=20_000)
    p.add_argument("--features", type=int, default=300)
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--e2e-users", type=int, default=1000)
    p.add_argument("--e2e-items", type=int, default=5000)
    args = p.parse_args()
    if not _kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(args.items, args.features, args.repeat)
    bench_end_to_end(args.e2e_users, args.e2e_items, 50)


if __name__ == "__main__":
    main()
