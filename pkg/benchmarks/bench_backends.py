"""Benchmark the compiled extension against the pure-Python fallback.

Times the cyclic Jacobi eigensolver on batches of random symmetric matrices
and CSR breadth-first search on random regular graphs, checks that both
backends agree, and prints the speedup.

Run:  python benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coarsecert import _reference
from coarsecert.generators import random_regular

try:
    from coarsecert import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_jacobi(repeats: int) -> None:
    rng = np.random.default_rng(42)
    print(f"{'jacobi_eigh':<24}{'compiled':>12}{'python':>12}{'speedup':>10}")
    for m, batch in ((8, 200), (16, 100), (22, 60), (64, 8)):
        mats = []
        for _ in range(batch):
            a = rng.standard_normal((m, m))
            mats.append(a + a.T)

        def run(impl, mats=mats):
            for a in mats:
                impl.jacobi_eigh(a)

        t_py = _time(run, _reference, repeats=repeats)
        if _speedups is None:
            print(f"{m:>3}x{m:<3} x{batch:<13}{'n/a':>12}{t_py:>12.4f}{'':>10}")
            continue
        t_c = _time(run, _speedups, repeats=repeats)
        wc, _ = _speedups.jacobi_eigh(mats[0])
        wp, _ = _reference.jacobi_eigh(mats[0])
        assert np.allclose(wc, wp, atol=1e-10), "backends disagree"
        print(
            f"{m:>3}x{m:<3} x{batch:<13}{t_c:>12.4f}{t_py:>12.4f}"
            f"{t_py / t_c:>9.1f}x"
        )


def bench_bfs(repeats: int) -> None:
    print(f"\n{'bfs_distances':<24}{'compiled':>12}{'python':>12}{'speedup':>10}")
    for n in (200, 1000):
        g = random_regular(n, 3, seed=1)
        indptr, indices = g._csr

        def run(impl, indptr=indptr, indices=indices, n=n):
            for source in range(0, n, max(1, n // 100)):
                impl.bfs_distances(indptr, indices, source)

        t_py = _time(run, _reference, repeats=repeats)
        if _speedups is None:
            print(f"n={n:<19}{'n/a':>12}{t_py:>12.4f}{'':>10}")
            continue
        t_c = _time(run, _speedups, repeats=repeats)
        assert np.array_equal(
            _speedups.bfs_distances(indptr, indices, 0),
            _reference.bfs_distances(indptr, indices, 0),
        )
        print(f"n={n:<19}{t_c:>12.4f}{t_py:>12.4f}{t_py / t_c:>9.1f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    if _speedups is None:
        print("compiled extension not built; timing the fallback only\n")
    bench_jacobi(args.repeats)
    bench_bfs(args.repeats)


if __name__ == "__main__":
    main()
