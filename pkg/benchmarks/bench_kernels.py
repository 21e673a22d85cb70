#!/usr/bin/env python3
"""Benchmark the compiled CSR kernels against the pure-Python fallbacks.

Runs each kernel (matvec, matvec_reduce, gauss_seidel_sweep) on random sparse
matrices of increasing size, checks both backends produce bit-identical
output, and prints per-call timings with the speedup.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000]
"""

import argparse
import time

import numpy as np

from stormlet import kernels


def random_csr(rng, n, nnz_per_row):
    """Row-stochastic CSR arrays with `nnz_per_row` entries per row."""
    row_offsets = np.arange(0, (n + 1) * nnz_per_row, nnz_per_row, dtype=np.int64)
    col_indices = np.empty(n * nnz_per_row, dtype=np.int64)
    values = np.empty(n * nnz_per_row)
    for i in range(n):
        cols = np.sort(rng.choice(n, size=nnz_per_row, replace=False))
        probs = rng.random(nnz_per_row)
        probs /= probs.sum()
        col_indices[i * nnz_per_row : (i + 1) * nnz_per_row] = cols
        values[i * nnz_per_row : (i + 1) * nnz_per_row] = probs
    return row_offsets, col_indices, values


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_size(n, nnz_per_row, repeats, compiled):
    rng = np.random.default_rng(12345)
    row_offsets, col_indices, values = random_csr(rng, n, nnz_per_row)
    x = rng.random(n)
    b = rng.random(n)
    # two choices per state for the reduce kernel
    choice_offsets = np.arange(0, n + 1, 2, dtype=np.int64)
    n_states = len(choice_offsets) - 1

    rows = []
    for name, pure_fn, compiled_fn, make_args, identical in (
        (
            "matvec",
            kernels._py_csr_matvec,
            compiled.csr_matvec if compiled else None,
            lambda: (row_offsets, col_indices, values, x, np.empty(n)),
            lambda a, b_: np.array_equal(a[4], b_[4]),
        ),
        (
            "matvec_reduce",
            kernels._py_csr_matvec_reduce,
            compiled.csr_matvec_reduce if compiled else None,
            lambda: (
                row_offsets,
                col_indices,
                values,
                choice_offsets,
                b,
                x[:n],
                True,
                np.empty(n_states),
                np.empty(n_states, dtype=np.int64),
            ),
            lambda a, b_: np.array_equal(a[7], b_[7]) and np.array_equal(a[8], b_[8]),
        ),
        (
            "gauss_seidel_sweep",
            kernels._py_gauss_seidel_sweep,
            compiled.gauss_seidel_sweep if compiled else None,
            lambda: (row_offsets, col_indices, values, b * 0.01, x.copy() * 0.0, True),
            lambda a, b_: np.array_equal(a[4], b_[4]),
        ),
    ):
        pure_args = make_args()
        t_pure = timeit(lambda: pure_fn(*pure_args), repeats)
        if compiled_fn is None:
            rows.append((name, t_pure, None, None))
            continue
        comp_args = make_args()
        t_comp = timeit(lambda: compiled_fn(*comp_args), repeats)
        # re-run once each on fresh buffers to compare outputs
        pa, ca = make_args(), make_args()
        pure_fn(*pa)
        compiled_fn(*ca)
        assert identical(pa, ca), f"{name}: backends disagree at n={n}"
        rows.append((name, t_pure, t_comp, t_pure / t_comp))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes", default="1000,10000,100000", help="comma-separated state counts"
    )
    parser.add_argument("--nnz", type=int, default=4, help="nonzeros per row")
    parser.add_argument("--repeats", type=int, default=5, help="timing repetitions (best kept)")
    args = parser.parse_args()

    try:
        from stormlet import _ckernels as compiled
    except ImportError:
        compiled = None
        print("compiled backend unavailable; timing pure-Python only\n")

    print(f"active library backend: {kernels.BACKEND}")
    print(f"{'n':>8}  {'kernel':<20} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, t_pure, t_comp, speedup in bench_size(n, args.nnz, args.repeats, compiled):
            comp_s = f"{t_comp * 1e3:.3f}" if t_comp is not None else "-"
            speed_s = f"{speedup:.1f}x" if speedup is not None else "-"
            print(f"{n:>8}  {name:<20} {t_pure * 1e3:>10.3f} {comp_s:>14} {speed_s:>8}")
        if compiled is not None:
            print(f"{'':>8}  (outputs bit-identical across backends)")


if __name__ == "__main__":
    main()
