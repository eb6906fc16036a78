"""numba-compiled hot loops. Mirrors ``_kernels_numpy`` exactly, tie-breaks included."""
import numpy as np
from numba import njit


@njit(cache=True)
def _maxplus(F, L, cap, pc, out, choice):
    # out[S] = max_{U subset S, |U| <= cap} F[S ^ U] + L[U]; largest U wins ties
    size = F.shape[0]
    for S in range(size):
        U = S
        have = False
        best = 0
        arg = 0
        while True:
            if cap < 0 or pc[U] <= cap:
                val = F[S ^ U] + L[U]
                if not have or val > best:
                    best = val
                    arg = U
                    have = True
            if U == 0:
                break
            U = (U - 1) & S
        out[S] = best
        choice[S] = arg


@njit(cache=True)
def _popcounts(width):
    pc = np.zeros(1 << width, dtype=np.int64)
    for S in range(1, 1 << width):
        pc[S] = pc[S >> 1] + (S & 1)
    return pc


@njit(cache=True)
def dp_choices(lift, cap):
    n, size = lift.shape
    c = 0
    while (1 << c) < size:
        c += 1
    pc = _popcounts(c)
    F = np.zeros(size, dtype=np.int64)
    tmp = np.zeros(size, dtype=np.int64)
    choices = np.zeros((n, size), dtype=np.int64)
    for i in range(n):
        _maxplus(F, lift[i], cap, pc, tmp, choices[i])
        F, tmp = tmp, F
    return F, choices


@njit(cache=True)
def batch_welfare(tables, chunk_masks, n_chunks, subsets, cap):
    n = tables.shape[0]
    K = chunk_masks.shape[0]
    Q = subsets.shape[0]
    cmax = chunk_masks.shape[1]
    pc = _popcounts(cmax)
    out = np.zeros((K, Q), dtype=np.int64)
    for k in range(K):
        c = n_chunks[k]
        size = 1 << c
        union = np.zeros(size, dtype=np.int64)
        for j in range(c):
            for u in range(1 << j):
                union[(1 << j) + u] = union[u] | chunk_masks[k, j]
        lift = np.empty((n, size), dtype=np.int64)
        for i in range(n):
            for U in range(size):
                lift[i, U] = tables[i, union[U]]
        F = np.zeros(size, dtype=np.int64)
        tmp = np.zeros(size, dtype=np.int64)
        ch = np.zeros(size, dtype=np.int64)
        for q in range(Q):
            F[:] = 0
            for i in range(n):
                if (subsets[q] >> i) & 1:
                    _maxplus(F, lift[i], cap, pc, tmp, ch)
                    F, tmp = tmp, F
            out[k, q] = F[size - 1]
    return out


@njit(cache=True)
def itemized(labels, combos):
    C, r = combos.shape
    out = np.zeros(C, dtype=np.bool_)
    for a in range(C):
        seen = 0
        ok = True
        for b in range(r):
            bit = 1 << labels[combos[a, b]]
            if seen & bit:
                ok = False
                break
            seen |= bit
        out[a] = ok
    return out


@njit(cache=True)
def subadditive_disjoint(table, m):
    full = (1 << m) - 1
    for S in range(1 << m):
        comp = full ^ S
        T = comp
        while True:
            if table[S | T] > table[S] + table[T]:
                return False
            if T == 0:
                break
            T = (T - 1) & comp
    return True
