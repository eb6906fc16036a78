"""Pure-numpy versions of the hot loops (selected when numba is disabled)."""
from functools import lru_cache

import numpy as np

from .bits import deposit, popcounts, union_table


@lru_cache(maxsize=32)
def _superset_lists(c):
    full = (1 << c) - 1
    return tuple(U | deposit(full ^ U) for U in range(1 << c))


def _supersets(U, c):
    if c <= 12:
        return _superset_lists(c)[U]
    full = (1 << c) - 1
    return U | deposit(full ^ U)


def _maxplus(F, L, cap, c):
    # batched over rows; ascending U with >= so the largest U wins ties
    pc = popcounts(c)
    out = F + L[:, :1]
    choice = np.zeros(F.shape, dtype=np.int64)
    for U in range(1, 1 << c):
        if cap >= 0 and pc[U] > cap:
            continue
        sup = _supersets(U, c)
        cand = F[:, sup ^ U] + L[:, U: U + 1]
        cur = out[:, sup]
        upd = cand >= cur
        out[:, sup] = np.where(upd, cand, cur)
        choice[:, sup] = np.where(upd, U, choice[:, sup])
    return out, choice


def _width(size):
    c = 0
    while (1 << c) < size:
        c += 1
    return c


def dp_choices(lift, cap):
    n, size = lift.shape
    c = _width(size)
    F = np.zeros((1, size), dtype=np.int64)
    choices = np.zeros((n, size), dtype=np.int64)
    for i in range(n):
        F, ch = _maxplus(F, lift[i: i + 1], cap, c)
        choices[i] = ch[0]
    return F[0], choices


def batch_welfare(tables, chunk_masks, n_chunks, subsets, cap):
    n = tables.shape[0]
    K = chunk_masks.shape[0]
    out = np.zeros((K, len(subsets)), dtype=np.int64)
    for c in np.unique(n_chunks):
        c = int(c)
        rows = np.nonzero(n_chunks == c)[0]
        unions = np.stack([union_table(chunk_masks[k, :c]) for k in rows])
        lift = tables[:, unions]  # (n, rows, 2^c)
        for q, T in enumerate(subsets):
            F = np.zeros((len(rows), 1 << c), dtype=np.int64)
            for i in range(n):
                if (int(T) >> i) & 1:
                    F, _ = _maxplus(F, lift[i], cap, c)
            out[rows, q] = F[:, -1]
    return out


def itemized(labels, combos):
    lab = np.sort(labels[combos], axis=1)
    return np.all(np.diff(lab, axis=1) != 0, axis=1)


def subadditive_disjoint(table, m):
    full = (1 << m) - 1
    for S in range(1 << m):
        T = deposit(full ^ S)
        if np.any(table[S | T] > table[S] + table[T]):
            return False
    return True
