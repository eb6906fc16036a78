"""Allocation banks: the ranges that the maximal-in-range mechanisms optimize over.

Structured banks are never materialized.  ``contains`` and ``menu`` work on the
structure directly; ``members``/``restrict`` enumerate explicitly and are
guarded by an enumeration budget.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import isqrt

import numpy as np

from .bits import as_mask, full_mask, items_of, union_table
from .errors import MalformedInput, ScaleRefused
from .partitions import (
    BidderBucketing, Partition, PartitionList, find_r_itemizing, find_regular_list, shift_closure,
)

ENUM_BUDGET = 2_000_000
UNASSIGNED = -1


@dataclass(frozen=True)
class Allocation:
    """Per-bidder bundles (bitmasks) that are pairwise disjoint; items may stay unassigned."""

    bundles: tuple
    m: int

    def __post_init__(self):
        bundles = tuple(int(b) for b in self.bundles)
        seen = 0
        for b in bundles:
            if b < 0 or b >> self.m:
                raise MalformedInput("bundle uses an item outside 0..m-1")
            if b & seen:
                raise MalformedInput("bundles overlap")
            seen |= b
        object.__setattr__(self, "bundles", bundles)

    @property
    def n(self) -> int:
        return len(self.bundles)

    @classmethod
    def from_sets(cls, sets, m):
        return cls(tuple(as_mask(S, m) for S in sets), m)

    @classmethod
    def from_assignment(cls, assignment, n):
        bundles = [0] * n
        for j, i in enumerate(assignment):
            if i is None or i == UNASSIGNED:
                continue
            if not 0 <= i < n:
                raise MalformedInput(f"item {j} assigned to unknown bidder {i}")
            bundles[i] |= 1 << j
        return cls(tuple(bundles), len(assignment))

    @property
    def assignment(self) -> list[int]:
        out = [UNASSIGNED] * self.m
        for i, b in enumerate(self.bundles):
            for j in items_of(b):
                out[j] = i
        return out

    def restrict(self, sub) -> "Allocation":
        sub = as_mask(sub, self.m)
        return Allocation(tuple(b & sub for b in self.bundles), self.m)

    def sets(self) -> list[list[int]]:
        return [items_of(b) for b in self.bundles]

    def welfare(self, valuations) -> int:
        return sum(v.value(b) for v, b in zip(valuations, self.bundles))


def empty_allocation(n, m):
    return Allocation((0,) * n, m)


def grand_bundle(i, n, m):
    return Allocation(tuple(full_mask(m) if j == i else 0 for j in range(n)), m)


def memo(obj, key, build):
    """Per-object cache for derived arrays; partition lists and params never change."""
    cache = obj.__dict__.setdefault("_memo", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def _is_chunk_union(bundle, chunks) -> bool:
    for c in chunks:
        hit = c & bundle
        if hit and hit != c:
            return False
    return True


def _chunk_count(bundle, chunks) -> int:
    return sum(1 for c in chunks if c & bundle)


def _assignments(chunks, owners, n, cap=None):
    """Yield bundle tuples for every assignment of ``chunks`` to ``owners`` or nobody."""
    choices = list(owners) + [UNASSIGNED]
    for pick in itertools.product(choices, repeat=len(chunks)):
        bundles = [0] * n
        if cap is not None:
            counts = [0] * n
        ok = True
        for c, i in zip(chunks, pick):
            if i == UNASSIGNED:
                continue
            bundles[i] |= c
            if cap is not None:
                counts[i] += 1
                if counts[i] > cap:
                    ok = False
                    break
        if ok:
            yield tuple(bundles)


class AllocationBank:
    shape = "abstract"

    def __init__(self, n: int, m: int):
        self.n = int(n)
        self.m = int(m)

    def _check(self, A: Allocation):
        if A.n != self.n or A.m != self.m:
            raise MalformedInput(f"allocation is for n={A.n}, m={A.m}; bank has n={self.n}, m={self.m}")

    def contains(self, A: Allocation) -> bool:
        raise NotImplementedError

    def menu_array(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def menu(self, i: int):
        """Every set some member awards bidder ``i``, each once."""
        if not 0 <= i < self.n:
            raise MalformedInput(f"no bidder {i}")
        for S in self.menu_array(i).tolist():
            yield S

    def _restricted(self, sub: int):
        raise NotImplementedError

    def _enum_size(self, sub: int) -> int:
        raise NotImplementedError

    def members(self, budget: int | None = None) -> list[Allocation]:
        return self.restrict(full_mask(self.m), budget).allocations

    def restrict(self, sub, budget: int | None = None) -> "ExplicitBank":
        sub = as_mask(sub, self.m)
        budget = ENUM_BUDGET if budget is None else budget
        size = self._enum_size(sub)
        if size > budget:
            raise ScaleRefused(f"restriction enumerates ~{size} candidates (budget {budget})")
        seen = dict.fromkeys(self._restricted(sub))
        return ExplicitBank([Allocation(b, self.m) for b in seen], self.n, self.m)

    def describe(self) -> str:
        return self.shape


class ExplicitBank(AllocationBank):
    shape = "explicit"

    def __init__(self, allocations, n=None, m=None):
        allocations = list(dict.fromkeys(allocations))
        if n is None or m is None:
            if not allocations:
                raise MalformedInput("empty explicit bank needs n and m")
            n, m = allocations[0].n, allocations[0].m
        super().__init__(n, m)
        for A in allocations:
            self._check(A)
        self.allocations = allocations
        self._set = set(allocations)

    def contains(self, A):
        self._check(A)
        return A in self._set

    def menu_array(self, i):
        return np.unique(np.array([A.bundles[i] for A in self.allocations] or [0], dtype=np.int64))

    def _enum_size(self, sub):
        return len(self.allocations)

    def _restricted(self, sub):
        for A in self.allocations:
            yield tuple(b & sub for b in A.bundles)

    def bundles_matrix(self) -> np.ndarray:
        return np.array([A.bundles for A in self.allocations], dtype=np.int64).reshape(-1, self.n)

    def describe(self):
        return f"explicit(size={len(self.allocations)})"


class ChunkingBank(AllocationBank):
    """All bidders draw chunk unions from one shared partition index per allocation."""

    shape = "chunking"

    def __init__(self, L: PartitionList, n: int):
        if L.items != tuple(range(L.m)):
            raise MalformedInput("chunking bank needs partitions over items 0..m-1")
        super().__init__(n, L.m)
        self.L = L

    def contains(self, A):
        self._check(A)
        for B in self.L:
            if all(_is_chunk_union(b, B.nonempty_chunks) for b in A.bundles):
                return True
        return False

    def menu_array(self, i):
        return memo(self.L, "menu", lambda: np.unique(
            np.concatenate([union_table(B.nonempty_chunks) for B in self.L])))

    def _enum_size(self, sub):
        return sum((self.n + 1) ** sum(1 for c in B.nonempty_chunks if c & sub) for B in self.L)

    def _restricted(self, sub):
        for B in self.L:
            chunks = [c & sub for c in B.nonempty_chunks if c & sub]
            yield from _assignments(chunks, range(self.n), self.n)

    def describe(self):
        return f"chunking(z={self.L.z},t={self.L.t})"


class RChunkingBank(AllocationBank):
    """Single partition; each bidder gets a union of at most ``r`` chunks."""

    shape = "r_chunking"

    def __init__(self, B: Partition, r: int, n: int):
        if r < 0 or r > B.t:
            raise MalformedInput("need 0 <= r <= t")
        super().__init__(n, B.size)
        self.B = B
        self.r = int(r)

    def contains(self, A):
        self._check(A)
        chunks = self.B.nonempty_chunks
        return all(_is_chunk_union(b, chunks) and _chunk_count(b, chunks) <= self.r for b in A.bundles)

    def menu_array(self, i):
        return memo(self.B, ("menu", self.r), self._menu)

    def _menu(self):
        chunks = self.B.nonempty_chunks
        out = [0]
        for size in range(1, min(self.r, len(chunks)) + 1):
            for pick in itertools.combinations(chunks, size):
                u = 0
                for c in pick:
                    u |= c
                out.append(u)
        return np.unique(np.array(out, dtype=np.int64))

    def _enum_size(self, sub):
        return (self.n + 1) ** sum(1 for c in self.B.nonempty_chunks if c & sub)

    def _restricted(self, sub):
        touching = [c for c in self.B.nonempty_chunks if c & sub]
        for bundles in _assignments(touching, range(self.n), self.n, cap=self.r):
            yield tuple(b & sub for b in bundles)

    def describe(self):
        return f"r_chunking(t={self.B.t},r={self.r})"


@dataclass
class BucketShatteringParams:
    """Outer bucketings of the items plus an itemizing chunking list per (bucketing, bucket)."""

    k: int
    t: int
    outer: PartitionList
    inner: dict = field(default_factory=dict)  # (l, s) -> PartitionList over that bucket, or None
    seed: int | None = None

    def __post_init__(self):
        if self.t < 1 or self.outer.t != self.t:
            raise MalformedInput("outer list must bucket items into t >= 1 buckets")
        for l, B in enumerate(self.outer):
            for s, bucket in enumerate(B.chunk_masks):
                Lin = self.inner.get((l, s))
                if bucket == 0:
                    if Lin is not None:
                        raise MalformedInput(f"empty bucket ({l},{s}) has chunkings")
                    continue
                if Lin is None or sorted(Lin.items) != items_of(bucket):
                    raise MalformedInput(f"inner list ({l},{s}) must partition exactly its bucket")

    @property
    def m(self) -> int:
        return self.outer.m

    @property
    def z(self) -> int:
        return self.outer.z

    def chunkings(self, l, s):
        Lin = self.inner.get((l, s))
        return [] if Lin is None else list(Lin)

    def inner_z(self) -> int:
        return max((len(L) for L in self.inner.values() if L is not None), default=0)


def derive_seed(seed, *tags) -> int:
    return int(np.random.SeedSequence([int(seed), *[int(x) for x in tags]]).generate_state(1)[0])


def bucket_count(m: int, k: int) -> int:
    """floor(sqrt(m/k)/2) computed exactly."""
    return isqrt(m // (4 * k)) if k >= 1 else 0


@lru_cache(maxsize=64)
def make_bucket_shattering_params(m: int, k: int, seed: int = 0, z: int | None = None,
                                  chunk_factor: int = 4, z_inner_max: int = 1 << 16) -> BucketShatteringParams:
    t = bucket_count(m, k)
    if t < 1:
        raise MalformedInput(f"bucket count floor(sqrt(m/k)/2) is 0 for m={m}, k={k}")
    outer = find_regular_list(m, t, z=m if z is None else z, seed=derive_seed(seed, 0))
    inner = {}
    for l, B in enumerate(outer):
        for s, bucket in enumerate(B.chunk_masks):
            items = items_of(bucket)
            if not items:
                continue
            width = min(chunk_factor * k, len(items))
            inner[(l, s)] = find_r_itemizing(len(items), width, width, z_max=z_inner_max,
                                             seed=derive_seed(seed, 1, l, s), domain=tuple(items))
    return BucketShatteringParams(k, t, outer, inner, seed)


class BucketingBank(AllocationBank):
    """Grand bundles, plus: pick an item bucketing l and a bidder bucketing P, and inside
    each bucket s award bidders P_s chunk unions from one inner chunking of that bucket.
    ``bucketings=None`` means every P in [t]^N is allowed."""

    def __init__(self, params: BucketShatteringParams, n: int, bucketings=None):
        super().__init__(n, params.m)
        self.params = params
        self.t = params.t
        if bucketings is not None:
            bucketings = list(bucketings)
            if not bucketings:
                raise MalformedInput("restricted bucketing range must be nonempty")
            for P in bucketings:
                if P.n != n or P.t != params.t:
                    raise MalformedInput("bidder bucketing has wrong n or t")
        self.bucketings = bucketings

    @property
    def shape(self):
        return "bucket_shattering" if self.bucketings is None else "p_bucketing"

    def bucket_label_options(self, i):
        if self.bucketings is None:
            return range(self.t)
        return sorted({int(P.labels[i]) for P in self.bucketings})

    def contains(self, A):
        self._check(A)
        full = full_mask(self.m)
        nonempty = [i for i, b in enumerate(A.bundles) if b]
        if len(nonempty) == 1 and A.bundles[nonempty[0]] == full:
            return True
        for l, B in enumerate(self.params.outer):
            buckets = B.chunk_masks
            label = {}
            for i in nonempty:
                s = next((s for s, bs in enumerate(buckets) if A.bundles[i] & ~bs == 0), None)
                if s is None:
                    break
                label[i] = s
            else:
                if self.bucketings is not None and not any(
                        all(int(P.labels[i]) == s for i, s in label.items()) for P in self.bucketings):
                    continue
                if all(self._bucket_ok(l, s, [A.bundles[i] for i in label if label[i] == s])
                       for s in range(self.t)):
                    return True
        return False

    def _bucket_ok(self, l, s, bundles):
        if not bundles:
            return True
        return any(all(_is_chunk_union(b, C.nonempty_chunks) for b in bundles)
                   for C in self.params.chunkings(l, s))

    def menu_array(self, i):
        labels = tuple(self.bucket_label_options(i))
        return memo(self.params, ("menu", labels), lambda: self._menu(labels))

    def _menu(self, labels):
        parts = [np.array([0, full_mask(self.m)], dtype=np.int64)]
        for l in range(self.params.z):
            for s in labels:
                for C in self.params.chunkings(l, s):
                    parts.append(union_table(C.nonempty_chunks))
        return np.unique(np.concatenate(parts))

    def _bidder_bucketings(self):
        if self.bucketings is not None:
            return [P.bucket_masks() for P in self.bucketings]
        out = []
        for labels in itertools.product(range(self.t), repeat=self.n):
            masks = [0] * self.t
            for i, s in enumerate(labels):
                masks[s] |= 1 << i
            out.append(tuple(masks))
        return out

    def _enum_size(self, sub):
        per_l = 0
        nP = len(self.bucketings) if self.bucketings is not None else self.t ** self.n
        for l in range(self.params.z):
            prod = 1
            for s in range(self.t):
                prod *= max(1, sum((self.n + 1) ** sum(1 for c in C.nonempty_chunks if c & sub)
                                   for C in self.params.chunkings(l, s)))
            per_l += prod
        return self.n + nP * per_l

    def _restricted(self, sub):
        for i in range(self.n):
            yield tuple(sub if j == i else 0 for j in range(self.n))
        Ps = self._bidder_bucketings()
        for l in range(self.params.z):
            cache = {}

            def bucket_options(s, T):
                key = (s, T)
                if key not in cache:
                    opts = dict()
                    chunkings = self.params.chunkings(l, s)
                    if not chunkings:
                        opts[(0,) * self.n] = None
                    for C in chunkings:
                        chunks = [c & sub for c in C.nonempty_chunks if c & sub]
                        for b in _assignments(chunks, items_of(T), self.n):
                            opts[b] = None
                    cache[key] = list(opts)
                return cache[key]

            for masks in Ps:
                lists = [bucket_options(s, masks[s]) for s in range(self.t)]
                for combo in itertools.product(*lists):
                    yield tuple(sum(bs[i] for bs in combo) for i in range(self.n))

    def describe(self):
        p = self.params
        base = f"z={p.z},t={p.t},k={p.k},inner_z<={p.inner_z()}"
        if self.bucketings is None:
            return f"bucket_shattering({base})"
        return f"p_bucketing({base},|P|={len(self.bucketings)})"


def explicit_bank(allocations, n=None, m=None) -> ExplicitBank:
    return ExplicitBank(allocations, n, m)


def chunking_bank(L: PartitionList, n: int) -> ChunkingBank:
    return ChunkingBank(L, n)


def r_chunking_bank(B: Partition, r: int, n: int) -> RChunkingBank:
    return RChunkingBank(B, r, n)


def bucket_shattering_bank(params: BucketShatteringParams, n: int) -> BucketingBank:
    return BucketingBank(params, n)


def p_bucketing_bank(params: BucketShatteringParams, P_list, n: int) -> BucketingBank:
    """Bucketing bank restricted to ``P_list`` closed under cyclic bucket shifts."""
    return BucketingBank(params, n, shift_closure(P_list))


def all_bucketings(n: int, t: int) -> list[BidderBucketing]:
    return [BidderBucketing(np.array(lab, dtype=np.int64), t)
            for lab in itertools.product(range(t), repeat=n)]


def complete_bank(n: int, m: int) -> ExplicitBank:
    """Every allocation of m items to n bidders (or nobody)."""
    return ExplicitBank([Allocation.from_assignment(a, n)
                         for a in itertools.product(range(-1, n), repeat=m)], n, m)
