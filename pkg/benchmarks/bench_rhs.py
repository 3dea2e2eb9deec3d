"""Time the vector field: compiled vs numpy backend, fast vs reference path.

    python3 benchmarks/bench_rhs.py [--sizes 256 1024 4096] [--repeat 5]

Prints a table of best-of-``repeat`` timings and the two speedups the
project tracks: fast/reference at the largest size (target >= 10x, report
only) and cython/python for each path.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from sdcoag import KernelSpec, RhsWorkspace
from sdcoag.rhs import BACKENDS, rhs_fast, rhs_reference


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=loops)) / loops


def bench(kernel: KernelSpec, n: int, repeat: int) -> dict:
    rng = np.random.default_rng(n)
    psi = rng.random(n)
    psi /= np.arange(1, n + 1) @ psi
    kernel.matrix(n), kernel.factors(n)  # warm the caches outside the timing
    out = np.empty(n)
    ws = RhsWorkspace(n, terms=2)
    row = {}
    for backend in sorted(BACKENDS):
        row[f"fast/{backend}"] = best_time(lambda: rhs_fast(kernel, psi, ws, out, backend), repeat)
        row[f"ref/{backend}"] = best_time(lambda: rhs_reference(kernel, psi, ws, out, backend), repeat)
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--kernel", default="sum", choices=("constant", "sum", "alpha_sum", "product"))
    args = ap.parse_args(argv)

    kernel = {
        "constant": KernelSpec.constant(1.0),
        "sum": KernelSpec.sum(1.0),
        "alpha_sum": KernelSpec.alpha_sum(0.5),
        "product": KernelSpec.product(1.0),
    }[args.kernel]

    backends = sorted(BACKENDS)
    cols = [f"{p}/{b}" for p in ("fast", "ref") for b in backends]
    print(f"kernel={kernel.label()}  backends={backends}  (seconds per call)")
    print(f"{'n':>6} " + " ".join(f"{c:>14}" for c in cols))
    last = None
    for n in args.sizes:
        row = bench(kernel, n, args.repeat)
        print(f"{n:>6} " + " ".join(f"{row[c]:14.3e}" for c in cols))
        last = (n, row)

    n, row = last
    print()
    for b in backends:
        ratio = row[f"ref/{b}"] / row[f"fast/{b}"]
        flag = "ok" if ratio >= 10 else "below 10x"
        print(f"n={n} {b}: fast path {ratio:8.1f}x faster than reference ({flag})")
    if "cython" in BACKENDS:
        for p in ("fast", "ref"):
            print(f"n={n} {p}: cython {row[f'{p}/python'] / row[f'{p}/cython']:8.1f}x faster than python")


if __name__ == "__main__":
    main()
