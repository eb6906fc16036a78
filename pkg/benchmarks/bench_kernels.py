"""Time the numba kernels against the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the env flag is not needed here.  Each
case also asserts that the two backends agree.
"""
import argparse
import time

import numpy as np

from mirauction import _kernels_numba as nb
from mirauction import _kernels_numpy as npk
from mirauction.partitions import _combos


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(rng):
    for c, n in [(8, 4), (12, 4), (14, 3)]:
        lift = rng.integers(0, 50, size=(n, 1 << c)).astype(np.int64)
        lift[:, 0] = 0
        yield f"dp_choices c={c} n={n}", (lambda f, x=lift: f.dp_choices(x, -1))

    m, n, K = 12, 3, 120
    tables = rng.integers(0, 50, size=(n, 1 << m)).astype(np.int64)
    tables[:, 0] = 0
    labels = rng.integers(0, 8, size=(K, m))
    cm = np.zeros((K, 8), dtype=np.int64)
    nc = np.zeros(K, dtype=np.int64)
    for r in range(K):
        chunks = [0] * 8
        for j, lab in enumerate(labels[r]):
            chunks[lab] |= 1 << j
        chunks = [c for c in chunks if c]
        cm[r, :len(chunks)] = chunks
        nc[r] = len(chunks)
    subsets = np.array([7, 6, 5, 3], dtype=np.int64)
    yield f"batch_welfare m={m} K={K}", (lambda f: f.batch_welfare(tables, cm, nc, subsets, -1))

    combos = _combos(16, 4, 1 << 20)
    lab = rng.integers(0, 8, size=16).astype(np.int64)
    yield "itemized m=16 r=4", (lambda f: f.itemized(lab, combos))

    tab = np.sort(rng.integers(0, 100, size=1 << 12)).astype(np.int64)
    yield "subadditive_disjoint m=12", (lambda f: f.subadditive_disjoint(tab, 12))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, run in cases(rng):
        run(nb)  # compile outside the timed region
        t_nb, a = _best(lambda: run(nb), args.repeat)
        t_np, b = _best(lambda: run(npk), args.repeat)
        if not _same(a, b):
            raise SystemExit(f"backends disagree on {name}")
        print(f"{name:32s} {t_nb * 1e3:10.3f} {t_np * 1e3:10.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
