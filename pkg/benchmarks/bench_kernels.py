"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fuzzypsu import _kernels_py as python_impl
from fuzzypsu.kernels import compiled_impl


def peel_rows(n_rows: int, n_cols: int, alpha: int = 3, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows = np.empty((n_rows, alpha), dtype=np.int64)
    for i in range(n_rows):
        rows[i] = rng.choice(n_cols, size=alpha, replace=False)
    return rows


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if compiled_impl is None:
        print("compiled kernels not built; only the Python timings are shown")
    impls = [("python", python_impl)] + ([("cython", compiled_impl)] if compiled_impl else [])

    cases = []
    for n in (1_000, 10_000, 100_000):
        rows = peel_rows(n, int(1.3 * n) + 1)
        cases.append((f"peel_order N={n}", lambda impl, r=rows: impl.peel_order(r, r.max() + 1)))
    for m in (100, 10_000):
        b = max(1, -(-3 * m // 2))
        cases.append((f"bucket_candidates M={m}",
                      lambda impl, m=m, b=b: impl.bucket_candidates(m, b, 3, 12345)))

    print(f"{'case':28s}" + "".join(f"{name:>12s}" for name, _ in impls) + "     speedup")
    for label, fn in cases:
        times = []
        for _, impl in impls:
            t = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
            times.append(t)
        speed = f"{times[0] / times[1]:10.1f}x" if len(times) == 2 else ""
        print(f"{label:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
