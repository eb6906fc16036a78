"""Exact welfare optimization over banks, VCG (Clarke pivot) pricing, and the
chunking / bucket-shattering / efficient bucket-shattering mechanisms."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .banks import (
    Allocation, AllocationBank, BucketingBank, ChunkingBank, ExplicitBank, RChunkingBank,
    bucket_count, chunking_bank, derive_seed, make_bucket_shattering_params, memo, p_bucketing_bank,
)
from .bits import full_mask, items_of, union_table
from .errors import MalformedInput, ScaleRefused
from .partitions import PartitionList, find_r_itemizing, sample_balanced_bucketings
from .valuations import QueryLedger, common_scale

DP_BUDGET = 20
BIDDER_BUDGET = 12
CHUNK_FACTOR = 4


@dataclass
class ChunkInstance:
    """Disjoint chunks treated as single items, plus the bidders that compete for them."""

    chunks: tuple
    valuations: list
    bidders: tuple | None = None

    def __post_init__(self):
        self.chunks = tuple(int(c) for c in self.chunks)
        seen = 0
        for c in self.chunks:
            if c & seen:
                raise MalformedInput("chunks must be pairwise disjoint")
            seen |= c
        if self.bidders is None:
            self.bidders = tuple(range(len(self.valuations)))

    def lifted(self, i: int, chunk_set: int) -> int:
        u = 0
        for j in items_of(chunk_set):
            u |= self.chunks[j]
        return self.valuations[i].value(u)

    def expand(self, chunk_set: int) -> int:
        u = 0
        for j in items_of(chunk_set):
            u |= self.chunks[j]
        return u


def _dp_on_rows(rows, chunks, cap=-1, budget=None):
    """Optimal assignment of ``chunks`` to the bidders whose tables are ``rows``."""
    budget = DP_BUDGET if budget is None else budget
    c = len(chunks)
    if c > budget:
        raise ScaleRefused(f"{c} chunks exceed the DP budget of {budget}")
    if len(rows) == 0:
        return (), 0
    unions = union_table(chunks)
    lift = np.ascontiguousarray(np.stack([r[unions] for r in rows]), dtype=np.int64)
    F, choices = kernels.dp_choices(lift, cap)
    S = (1 << c) - 1
    welfare = int(F[S])
    picks = [0] * len(rows)
    for i in range(len(rows) - 1, -1, -1):
        U = int(choices[i, S])
        picks[i] = U
        S ^= U
    return tuple(picks), welfare


def dp_optimize(inst: ChunkInstance, cap: int = -1, budget: int | None = None):
    """Exact optimum over assignments of chunks to ``inst.bidders`` (or nobody).

    Returns (per-bidder chunk-index masks aligned with ``inst.bidders``, welfare).
    A ``cap`` >= 0 bounds the number of chunks any one bidder may receive.
    """
    rows = [inst.valuations[i].table for i in inst.bidders]
    return _dp_on_rows(rows, inst.chunks, cap, budget)


def _chunk_matrix(chunk_lists):
    cmax = max((len(c) for c in chunk_lists), default=0)
    cm = np.zeros((len(chunk_lists), max(cmax, 1)), dtype=np.int64)
    nc = np.zeros(len(chunk_lists), dtype=np.int64)
    for k, chunks in enumerate(chunk_lists):
        cm[k, :len(chunks)] = chunks
        nc[k] = len(chunks)
    if cmax > DP_BUDGET:
        raise ScaleRefused(f"{cmax} chunks exceed the DP budget of {DP_BUDGET}")
    return cm, nc


def _query_tables(bank: AllocationBank, valuations, ledger: QueryLedger | None):
    """Dense tables holding only the values the bank's menus ask for; the rest read as 0."""
    n, m = bank.n, bank.m
    tables = np.zeros((n, 1 << m), dtype=np.int64)
    for i, v in enumerate(valuations):
        if v.m != m:
            raise MalformedInput(f"bidder {i} valuation has m={v.m}, bank has m={m}")
        menu = bank.menu_array(i)
        tables[i, menu] = v.values(menu)
        if ledger is not None:
            ledger.record(i, menu)
    return tables


# --- per-bank solvers ------------------------------------------------------
# Each returns (values for every requested bidder subset, realizer); realizer()
# yields the argmax allocation for subsets[0].

def _grand(tables, q, m):
    full = full_mask(m)
    best, who = 0, None
    for i in items_of(q):
        if tables[i, full] > best:
            best, who = int(tables[i, full]), i
    return best, who


def _solve_explicit(bank: ExplicitBank, tables, subsets):
    mat = bank.bundles_matrix()
    if len(mat) == 0:
        raise MalformedInput("cannot optimize over an empty bank")
    per = np.stack([tables[i, mat[:, i]] for i in range(bank.n)], axis=1)  # (K, n)
    vals = []
    for q in subsets:
        sel = [i for i in range(bank.n) if (q >> i) & 1]
        vals.append(per[:, sel].sum(axis=1) if sel else np.zeros(len(mat), dtype=np.int64))
    out = [int(v.max()) for v in vals]
    best = int(np.argmax(vals[0]))
    return out, lambda: bank.allocations[best]


def _solve_chunks(bank, tables, subsets, source, cap=-1, grand=True):
    # source is a PartitionList or a single Partition
    partitions = list(source) if isinstance(source, PartitionList) else [source]
    chunk_lists = [B.nonempty_chunks for B in partitions]
    cm, nc = memo(source, "chunk_matrix", lambda: _chunk_matrix(chunk_lists))
    W = kernels.batch_welfare(tables, cm, nc, np.array(subsets, dtype=np.int64), cap)
    out, order = [], []
    for qi, q in enumerate(subsets):
        val = int(W[:, qi].max())
        g, who = _grand(tables, q, bank.m) if grand else (0, None)
        out.append(max(val, g))
        order.append((val, g, who, int(np.argmax(W[:, qi]))))

    def realize():
        val, g, who, l = order[0]
        if grand and g > val:
            return Allocation(tuple(full_mask(bank.m) if i == who else 0 for i in range(bank.n)), bank.m)
        bidders = items_of(subsets[0])
        picks, _ = _dp_on_rows([tables[i] for i in bidders], chunk_lists[l], cap)
        bundles = [0] * bank.n
        for i, U in zip(bidders, picks):
            bundles[i] = int(union_table(chunk_lists[l])[U])
        return Allocation(tuple(bundles), bank.m)

    return out, realize


def _bucket_rows(p):
    rows, groups = [], []
    for l in range(p.z):
        for s in range(p.t):
            for C in p.chunkings(l, s):
                rows.append(C.nonempty_chunks)
                groups.append((l, s))
    cm, nc = _chunk_matrix(rows) if rows else (None, None)
    return rows, groups, cm, nc


def _solve_bucketing(bank: BucketingBank, tables, subsets):
    p, n, t, z = bank.params, bank.n, bank.t, bank.params.z
    rows, groups, cm, nc = memo(p, "rows", lambda: _bucket_rows(p))
    if bank.bucketings is None:
        if n > BIDDER_BUDGET:
            raise ScaleRefused(f"unrestricted bidder bucketing refused at n={n} > {BIDDER_BUDGET}; "
                               "use the efficient (p_bucketing) variant")
        T_list = list(range(1 << n))
    else:
        Pm = np.array([P.bucket_masks() for P in bank.bucketings], dtype=np.int64)  # (|P|, t)
        T_list = sorted({int(x) for q in subsets for x in (Pm & q).ravel()} | {0})
    col = {T: j for j, T in enumerate(T_list)}
    Wc = np.zeros((0, len(T_list)), dtype=np.int64)
    if rows:
        Wc = kernels.batch_welfare(tables, cm, nc, np.array(T_list, dtype=np.int64), -1)
    # W[l, s, T] = best inner chunking for bidders T in bucket s of bucketing l
    W = np.zeros((z, t, len(T_list)), dtype=np.int64)
    best_row = {}
    for r, (l, s) in enumerate(groups):
        upd = Wc[r] > W[l, s]
        if (l, s) not in best_row:
            best_row[(l, s)] = np.full(len(T_list), r)
            W[l, s] = Wc[r]
        else:
            best_row[(l, s)] = np.where(upd, r, best_row[(l, s)])
            W[l, s] = np.where(upd, Wc[r], W[l, s])

    out, order = [], []
    if bank.bucketings is None:
        dp = [kernels.dp_choices(np.ascontiguousarray(W[l]), -1) for l in range(z)]
        for q in subsets:
            per_l = np.array([int(F[q]) for F, _ in dp])
            l = int(np.argmax(per_l))
            g, who = _grand(tables, q, bank.m)
            out.append(max(int(per_l[l]), g))
            order.append((int(per_l[l]), g, who, l, None))
    else:
        for q in subsets:
            idx = np.vectorize(col.__getitem__, otypes=[np.int64])(Pm & q)  # (|P|, t)
            vals = W[:, np.arange(t)[None, :], idx].sum(axis=2)  # (z, |P|)
            flat = int(np.argmax(vals))
            l, pi = divmod(flat, vals.shape[1])
            g, who = _grand(tables, q, bank.m)
            out.append(max(int(vals[l, pi]), g))
            order.append((int(vals[l, pi]), g, who, l, pi))

    def realize():
        val, g, who, l, pi = order[0]
        if g > val:
            return Allocation(tuple(full_mask(bank.m) if i == who else 0 for i in range(n)), bank.m)
        if pi is None:
            _, choices = dp[l]
            S, groups_T = subsets[0], [0] * t
            for s in range(t - 1, -1, -1):
                groups_T[s] = int(choices[s, S])
                S ^= groups_T[s]
        else:
            groups_T = [int(x) & subsets[0] for x in Pm[pi]]
        bundles = [0] * n
        for s, T in enumerate(groups_T):
            if not T or (l, s) not in best_row:
                continue
            C = rows[int(best_row[(l, s)][col[T]])]
            bidders = items_of(T)
            picks, _ = _dp_on_rows([tables[i] for i in bidders], C)
            unions = union_table(C)
            for i, U in zip(bidders, picks):
                bundles[i] = int(unions[U])
        return Allocation(tuple(bundles), bank.m)

    return out, realize


def _solve(bank: AllocationBank, tables, subsets):
    if isinstance(bank, ExplicitBank):
        return _solve_explicit(bank, tables, subsets)
    if isinstance(bank, ChunkingBank):
        return _solve_chunks(bank, tables, subsets, bank.L)
    if isinstance(bank, RChunkingBank):
        return _solve_chunks(bank, tables, subsets, bank.B, cap=bank.r, grand=False)
    if isinstance(bank, BucketingBank):
        return _solve_bucketing(bank, tables, subsets)
    raise MalformedInput(f"unsupported bank shape {bank.shape}")


def optimize_over_bank(bank: AllocationBank, valuations, ledger: QueryLedger | None = None):
    """Welfare-maximizing member of ``bank``: returns (Allocation, welfare)."""
    valuations, _ = common_scale(list(valuations))
    if len(valuations) != bank.n:
        raise MalformedInput(f"bank has {bank.n} bidders, got {len(valuations)} valuations")
    tables = _query_tables(bank, valuations, ledger)
    (welfare,), realize = _solve(bank, tables, [full_mask(bank.n)])
    return realize(), welfare


@dataclass
class MechanismOutcome:
    allocation: Allocation
    payments: tuple
    welfare: int
    queries: tuple
    bank_descriptor: str
    denominator: int = 1
    z: int | None = None
    optimizations: int = 0
    diagnostics: dict = field(default_factory=dict)

    def utility(self, i: int, v) -> Fraction:
        """Exact utility of bidder i whose true valuation is ``v``."""
        return (Fraction(v.value(self.allocation.bundles[i]), v.denominator)
                - Fraction(self.payments[i], self.denominator))


def vcg_outcome(bank: AllocationBank, valuations, ledger: QueryLedger | None = None) -> MechanismOutcome:
    valuations, den = common_scale(list(valuations))
    n = bank.n
    if len(valuations) != n:
        raise MalformedInput(f"bank has {n} bidders, got {len(valuations)} valuations")
    ledger = QueryLedger(n, bank.m) if ledger is None else ledger
    tables = _query_tables(bank, valuations, ledger)
    everyone = full_mask(n)
    subsets = [everyone] + [everyone ^ (1 << i) for i in range(n)]
    values, realize = _solve(bank, tables, subsets)
    A = realize()
    own = [valuations[i].value(A.bundles[i]) for i in range(n)]
    welfare = sum(own)
    if welfare != values[0]:  # pragma: no cover - a solver bug
        raise AssertionError(f"realized welfare {welfare} != optimum {values[0]}")
    payments = tuple(values[1 + i] - (welfare - own[i]) for i in range(n))
    return MechanismOutcome(A, payments, welfare, ledger.snapshot(), bank.describe(), den,
                            optimizations=len(subsets))


# --- the mechanisms ----------------------------------------------------------

@lru_cache(maxsize=64)
def chunking_list(m: int, k: int, seed: int = 0, z_max: int = 1 << 16) -> PartitionList:
    """(4k)-itemizing list into min(4k, m) chunks, deterministic in (m, k, seed)."""
    if k < 1:
        raise MalformedInput("k must be at least 1")
    width = min(CHUNK_FACTOR * k, m)
    return find_r_itemizing(m, width, width, z_max=z_max, seed=derive_seed(seed, 3))


def chunking_mechanism(valuations, m: int, k: int, seed: int = 0, z_max: int = 1 << 16) -> MechanismOutcome:
    L = chunking_list(m, k, seed, z_max)
    out = vcg_outcome(chunking_bank(L, len(valuations)), valuations)
    out.z = L.z
    out.diagnostics.update(t=L.t, r=L.t, draws=L.draws, query_bound=L.z * (1 << L.t) + 1)
    return out


def bucket_shattering_mechanism(valuations, m: int, k: int, seed: int = 0, z: int | None = None) -> MechanismOutcome:
    params = make_bucket_shattering_params(m, k, seed, z)
    bank = BucketingBank(params, len(valuations))
    out = vcg_outcome(bank, valuations)
    out.z = params.z
    out.diagnostics.update(t=params.t, inner_z=params.inner_z())
    return out


def efficient_bucketings(n: int, m: int, k: int, y: int | None = None, seed: int = 0):
    t = bucket_count(m, k)
    if t < 1:
        raise MalformedInput(f"bucket count is 0 for m={m}, k={k}")
    y = m if y is None else y
    if y < 1:
        raise MalformedInput("y must be at least 1")
    return sample_balanced_bucketings(n, t, y, seed=derive_seed(seed, 2))


def efficient_bucket_shattering_mechanism(valuations, m: int, k: int, y: int | None = None,
                                          seed: int = 0, z: int | None = None,
                                          P_list=None) -> MechanismOutcome:
    params = make_bucket_shattering_params(m, k, seed, z)
    n = len(valuations)
    if P_list is None:
        P_list = efficient_bucketings(n, m, k, y, seed)
    bank = p_bucketing_bank(params, P_list, n)
    out = vcg_outcome(bank, valuations)
    out.z = params.z
    out.diagnostics.update(t=params.t, inner_z=params.inner_z(), y=len(P_list),
                           range_size=len(bank.bucketings))
    return out


MECHANISMS = {
    "chunking": chunking_mechanism,
    "bucket-shattering": bucket_shattering_mechanism,
    "efficient-bs": efficient_bucket_shattering_mechanism,
}


def run_mechanism(name: str, valuations, m: int, k: int, seed: int = 0, y: int | None = None):
    if name == "chunking":
        return chunking_mechanism(valuations, m, k, seed)
    if name == "bucket-shattering":
        return bucket_shattering_mechanism(valuations, m, k, seed)
    if name == "efficient-bs":
        return efficient_bucket_shattering_mechanism(valuations, m, k, y, seed)
    raise MalformedInput(f"unknown mechanism {name!r}")
