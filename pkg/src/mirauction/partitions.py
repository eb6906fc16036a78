"""Item partitions: sampling, itemizing certification, regularity, bidder bucketings."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import comb

import numpy as np

from . import kernels
from .bits import items_of, mask_of, popcount
from .errors import MalformedInput, ScaleRefused, SearchFailed
from .valuations import common_scale

ENUM_BUDGET = 200_000
# defaults for the hidden constants of regularity and balance
C1, C2 = 2, 6
C_BAL, BAL_RATIO = 4, Fraction(1, 4)


def rng_for(seed, *tags) -> np.random.Generator:
    """Independent deterministic stream for ``seed`` and a tuple of integer tags."""
    return np.random.default_rng([int(seed), *[int(x) for x in tags]])


@dataclass(frozen=True, eq=False)
class Partition:
    """Labels items of ``domain`` (default: 0..m-1) into chunks 0..t-1."""

    labels: np.ndarray
    t: int
    domain: tuple | None = None

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if self.t < 1:
            raise MalformedInput("a partition needs t >= 1 chunks")
        if lab.ndim != 1 or (lab.size and (lab.min() < 0 or lab.max() >= self.t)):
            raise MalformedInput("partition labels must lie in [0, t)")
        if self.domain is not None and len(self.domain) != lab.size:
            raise MalformedInput("domain and labels differ in length")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def size(self) -> int:
        return int(self.labels.size)

    @cached_property
    def items(self) -> tuple[int, ...]:
        return tuple(range(self.size)) if self.domain is None else tuple(int(x) for x in self.domain)

    @cached_property
    def chunk_masks(self) -> tuple[int, ...]:
        out = [0] * self.t
        for item, lab in zip(self.items, self.labels.tolist()):
            out[lab] |= 1 << item
        return tuple(out)

    @cached_property
    def nonempty_chunks(self) -> tuple[int, ...]:
        return tuple(c for c in self.chunk_masks if c)

    def chunks(self) -> list[list[int]]:
        return [items_of(c) for c in self.chunk_masks]

    def __eq__(self, other):
        return (isinstance(other, Partition) and self.t == other.t and self.items == other.items
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.t, self.items, self.labels.tobytes()))

    @classmethod
    def from_chunks(cls, chunks, t=None, domain=None):
        """Build from a list of chunks (item lists); items not listed are rejected."""
        chunks = [sorted(int(x) for x in c) for c in chunks]
        t = len(chunks) if t is None else t
        items = sorted(x for c in chunks for x in c)
        if len(set(items)) != len(items):
            raise MalformedInput("chunks overlap")
        if domain is None:
            domain = items if items != list(range(len(items))) else None
        dom = list(range(len(items))) if domain is None else [int(x) for x in domain]
        if sorted(dom) != items:
            raise MalformedInput("chunks must cover the domain exactly")
        where = {x: s for s, c in enumerate(chunks) for x in c}
        return cls(np.array([where[x] for x in dom], dtype=np.int64), t,
                   None if domain is None else tuple(dom))


def singleton_partition(m: int) -> Partition:
    return Partition(np.arange(m, dtype=np.int64), max(m, 1))


def equal_partition(m: int, t: int) -> Partition:
    """Round-robin: item j goes to chunk j mod t, so chunk sizes differ by at most one."""
    return Partition(np.arange(m, dtype=np.int64) % t, t)


@dataclass
class PartitionList:
    partitions: list
    certificate: str | None = None
    seed: int | None = None
    draws: int = 0

    def __post_init__(self):
        self.partitions = list(self.partitions)
        if not self.partitions:
            raise MalformedInput("a partition list must be nonempty")
        p0 = self.partitions[0]
        for p in self.partitions:
            if p.t != p0.t or p.items != p0.items:
                raise MalformedInput("all partitions in a list must share t and domain")

    @property
    def z(self) -> int:
        return len(self.partitions)

    @property
    def t(self) -> int:
        return self.partitions[0].t

    @property
    def m(self) -> int:
        return self.partitions[0].size

    @property
    def items(self) -> tuple[int, ...]:
        return self.partitions[0].items

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)

    def __getitem__(self, idx):
        return self.partitions[idx]

    def labels_matrix(self) -> np.ndarray:
        return np.stack([p.labels for p in self.partitions])


@dataclass(frozen=True, eq=False)
class BidderBucketing:
    labels: np.ndarray
    t: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.size and (lab.min() < 0 or lab.max() >= self.t):
            raise MalformedInput("bucket labels must lie in [0, t)")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def bucket_masks(self) -> tuple[int, ...]:
        out = [0] * self.t
        for i, s in enumerate(self.labels.tolist()):
            out[s] |= 1 << i
        return tuple(out)

    def shift(self, delta: int) -> "BidderBucketing":
        # new bucket s holds old bucket s + delta
        return BidderBucketing((self.labels - delta) % self.t, self.t)

    def key(self) -> tuple:
        return tuple(self.labels.tolist())

    def __eq__(self, other):
        return isinstance(other, BidderBucketing) and self.t == other.t and self.key() == other.key()

    def __hash__(self):
        return hash((self.t, self.key()))


@dataclass
class BalanceReport:
    N1: int
    light_buckets: tuple[int, ...]
    NP: int
    bucket_loads: tuple[int, ...]
    ratio: Fraction

    def balanced(self, threshold=BAL_RATIO) -> bool:
        return self.ratio >= threshold


# --- sampling and itemizing ------------------------------------------------

def sample_partition(m: int, t: int, seed=None, rng=None, domain=None) -> Partition:
    if t < 1:
        raise MalformedInput("t must be at least 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    return Partition(rng.integers(0, t, size=m, dtype=np.int64), t, domain)


def itemizes(B: Partition, S) -> bool:
    pos = {x: i for i, x in enumerate(B.items)}
    seen = set()
    members = items_of(int(S)) if isinstance(S, (int, np.integer)) else [int(x) for x in S]
    for j in members:
        if j not in pos:
            raise MalformedInput(f"item {j} is not in the partition's domain")
        lab = int(B.labels[pos[j]])
        if lab in seen:
            return False
        seen.add(lab)
    return True


def _combos(size: int, r: int, budget: int) -> np.ndarray:
    count = comb(size, r)
    if count > budget:
        raise ScaleRefused(f"C({size},{r})={count} exceeds enumeration budget {budget}")
    if r == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.combinations(range(size), r)), dtype=np.int64).reshape(count, r)


def _coverage(labels_rows, combos) -> np.ndarray:
    covered = np.zeros(len(combos), dtype=bool)
    for lab in labels_rows:
        covered |= kernels.itemized(lab, combos)
    return covered


def certify_r_itemizing(L: PartitionList, r: int, budget: int = ENUM_BUDGET) -> bool:
    """Exhaustively check every set of exactly ``min(r, size)`` items (smaller sets follow)."""
    r_eff = min(r, L.m)
    if r_eff <= 1:
        ok = True
    else:
        combos = _combos(L.m, r_eff, budget)
        ok = bool(_coverage(L.labels_matrix(), combos).all())
    if ok:
        L.certificate = f"r_itemizing:{r}"
    return ok


def find_r_itemizing(m: int, t: int, r: int, z_max: int = 4096, seed: int = 0,
                     budget: int = ENUM_BUDGET, domain=None) -> PartitionList:
    """Stream i.i.d. uniform partitions; keep a draw only if it itemizes an r-set none of
    the kept draws itemizes; stop once every r-set is itemized.

    ``z_max`` bounds the number of draws.  The kept list is re-certified from scratch.
    """
    if t < 1 or r < 0 or z_max < 1:
        raise MalformedInput("need t >= 1, r >= 0 and z_max >= 1")
    if r > m:
        raise MalformedInput(f"r={r} exceeds the {m} items")
    if r > t:
        raise SearchFailed(f"{t} chunks cannot itemize {r} items", witness=list(range(r)))
    if r == m and t == m:
        # only a bijective labeling itemizes all m items; no need to sample for it
        L = PartitionList([Partition(np.arange(m, dtype=np.int64), t, domain)], seed=seed, draws=0)
        certify_r_itemizing(L, r, budget)
        return L
    rng = np.random.default_rng(seed)
    combos = _combos(m, r, budget) if r >= 2 else None
    covered = None if combos is None else np.zeros(len(combos), dtype=bool)
    kept = []
    for draw in range(1, z_max + 1):
        lab = rng.integers(0, t, size=m, dtype=np.int64)
        if combos is None:
            kept.append(lab)
            break
        hit = kernels.itemized(lab, combos)
        if np.any(hit & ~covered):
            kept.append(lab)
            covered |= hit
            if covered.all():
                break
    if combos is not None and (not kept or not covered.all()):
        miss = combos[int(np.argmin(covered))] if covered is not None else np.arange(r)
        dom = list(range(m)) if domain is None else list(domain)
        raise SearchFailed(f"no {r}-itemizing list within {z_max} draws (m={m}, t={t})",
                           witness=[dom[int(x)] for x in miss], draws=z_max)
    L = PartitionList([Partition(x, t, domain) for x in kept], seed=seed, draws=draw)
    if not certify_r_itemizing(L, r, budget):  # pragma: no cover - guarded by construction
        raise SearchFailed("kept list failed re-certification")
    return L


# --- regularity -------------------------------------------------------------

def is_regular(B: Partition, buckets, c1=None, c2=None, m=None, t=None) -> bool:
    """Light buckets (|B_s| <= c1 m/t) must meet every chunk of B in <= c2 m/t^2 items."""
    c1 = C1 if c1 is None else c1
    c2 = C2 if c2 is None else c2
    if c1 <= 0 or c2 <= 0:
        raise MalformedInput("regularity constants must be positive")
    m = B.size if m is None else m
    t = B.t if t is None else t
    masks = [b if isinstance(b, int) else mask_of(b) for b in buckets]
    light = Fraction(c1) * m / t
    cap = Fraction(c2) * m / (t * t)
    for bs in masks:
        if popcount(bs) > light:
            continue
        for chunk in B.chunk_masks:
            if popcount(chunk & bs) > cap:
                return False
    return True


def find_regular_list(m: int, t: int, z: int | None = None, seed: int = 0) -> PartitionList:
    """``z`` (default m) uniform partitions into t buckets; regularity is checked per instance."""
    if t < 1 or t > max(m, 1):
        raise MalformedInput("need 1 <= t <= m")
    z = m if z is None else z
    rng = np.random.default_rng(seed)
    return PartitionList([sample_partition(m, t, rng=rng) for _ in range(max(z, 1))], seed=seed, draws=z)


def regular_index(L: PartitionList, buckets, c1=None, c2=None):
    """First index of a member regular for ``buckets``, or None."""
    for idx, B in enumerate(L):
        if is_regular(B, buckets, c1, c2):
            return idx
    return None


# --- bidder bucketings and balance -----------------------------------------

def sample_balanced_bucketings(n: int, t: int, y: int, seed: int = 0) -> list[BidderBucketing]:
    if t < 1:
        raise MalformedInput("t must be at least 1")
    rng = np.random.default_rng(seed)
    return [BidderBucketing(rng.integers(0, t, size=n, dtype=np.int64), t) for _ in range(y)]


def shift_closure(P_list) -> list[BidderBucketing]:
    out, seen = [], set()
    for P in P_list:
        for delta in range(P.t):
            Q = P.shift(delta)
            if Q not in seen:
                seen.add(Q)
                out.append(Q)
    return out


def balance_report(P: BidderBucketing, valuations, A_star, t: int, c_bal=None) -> BalanceReport:
    c_bal = C_BAL if c_bal is None else c_bal
    bundles = A_star.bundles
    n, m = len(bundles), A_star.m
    if P.n != n:
        raise MalformedInput("bucketing and allocation disagree on n")
    seen = 0
    for b in bundles:
        if b & seen:
            raise MalformedInput("A_star is not a feasible allocation")
        seen |= b
    sizes = [popcount(b) for b in bundles]
    N1 = mask_of(i for i in range(n) if Fraction(sizes[i]) <= Fraction(m, t))
    loads = []
    for bucket in P.bucket_masks():
        loads.append(sum(sizes[i] for i in items_of(bucket & N1)))
    light = tuple(s for s in range(t) if loads[s] <= Fraction(c_bal) * m / t)
    NP = 0
    buckets = P.bucket_masks()
    for s in light:
        NP |= buckets[s] & N1
    vals, _ = common_scale(list(valuations))
    opt_n1 = sum(vals[i].value(bundles[i]) for i in items_of(N1))
    opt_np = sum(vals[i].value(bundles[i]) for i in items_of(NP))
    ratio = Fraction(1) if opt_n1 == 0 else Fraction(opt_np, opt_n1)
    return BalanceReport(N1, light, NP, tuple(loads), ratio)
