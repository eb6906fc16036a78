"""Valuation oracles over item bitmasks.

Values are nonnegative integers; a valuation's ``denominator`` records the
scale (real value = numerator / denominator).  Every kind can produce a dense
table of all ``2**m`` values, which is what the mechanisms consume.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .bits import as_mask, full_mask, items_of, mask_of
from .errors import MalformedInput, ScaleRefused

TABLE_BUDGET = 22  # largest m for which dense tables are built
CHECK_BUDGET = 16
XOS_BUDGET = 8


def _all_masks(m):
    return np.arange(1 << m, dtype=np.int64)


def _popcount_array(masks):
    out = np.zeros(masks.shape, dtype=np.int64)
    x = masks.copy()
    while np.any(x):
        out += x & 1
        x >>= 1
    return out


class Valuation:
    kind = "abstract"

    def __init__(self, m: int, denominator: int = 1):
        if m < 0:
            raise MalformedInput("m must be nonnegative")
        self.m = int(m)
        self.denominator = int(denominator)

    def _eval(self, mask: int) -> int:
        raise NotImplementedError

    def _values(self, masks: np.ndarray) -> np.ndarray:
        return np.array([self._eval(int(S)) for S in masks], dtype=np.int64)

    def _table(self) -> np.ndarray:
        return self._values(_all_masks(self.m))

    def values(self, masks) -> np.ndarray:
        """Vectorized v over an int64 array of masks."""
        masks = np.asarray(masks, dtype=np.int64)
        if "table" in self.__dict__:
            return self.__dict__["table"][masks]
        return np.asarray(self._values(masks), dtype=np.int64)

    def value(self, S, ledger=None, bidder: int = 0) -> int:
        mask = as_mask(S, self.m)
        if ledger is not None:
            ledger.record(bidder, [mask])
        if "table" in self.__dict__:
            return int(self.__dict__["table"][mask])
        return int(self._eval(mask))

    __call__ = value

    @cached_property
    def table(self) -> np.ndarray:
        if self.m > TABLE_BUDGET:
            raise ScaleRefused(f"dense table for m={self.m} exceeds budget m<={TABLE_BUDGET}")
        tab = np.ascontiguousarray(self._table(), dtype=np.int64)
        tab.setflags(write=False)
        return tab

    def params(self) -> dict:
        raise NotImplementedError

    def to_spec(self) -> dict:
        return {"type": self.kind, **self.params()}

    def scaled(self, factor: int) -> "Valuation":
        if factor == 1:
            return self
        return ExplicitValuation(self.table * int(factor), denominator=self.denominator * int(factor))

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m})"


class AdditiveValuation(Valuation):
    kind = "additive"

    def __init__(self, weights, denominator: int = 1):
        w = [int(x) for x in weights]
        if any(x < 0 for x in w):
            raise MalformedInput("additive weights must be nonnegative")
        super().__init__(len(w), denominator)
        self.weights = w

    def _eval(self, mask):
        return sum(self.weights[j] for j in items_of(mask))

    def _values(self, masks):
        out = np.zeros(masks.shape, dtype=np.int64)
        for j, w in enumerate(self.weights):
            out += w * ((masks >> j) & 1)
        return out

    def params(self):
        return {"weights": list(self.weights)}


class CoverageValuation(Valuation):
    """Item j covers the elements ``covers[j]``; value is the covered element weight."""

    kind = "coverage"

    def __init__(self, covers, weights=None, denominator: int = 1):
        covers = [sorted({int(e) for e in c}) for c in covers]
        n_elems = 1 + max((max(c) for c in covers if c), default=-1)
        if weights is None:
            weights = [1] * n_elems
        weights = [int(w) for w in weights]
        if len(weights) < n_elems or any(w < 0 for w in weights):
            raise MalformedInput("coverage weights must be nonnegative and cover every element")
        super().__init__(len(covers), denominator)
        self.covers = covers
        self.weights = weights
        # item mask covering each element
        self._elem_masks = [0] * len(weights)
        for j, c in enumerate(covers):
            for e in c:
                self._elem_masks[e] |= 1 << j

    def _eval(self, mask):
        return sum(w for w, em in zip(self.weights, self._elem_masks) if em & mask)

    def _values(self, masks):
        out = np.zeros(masks.shape, dtype=np.int64)
        for w, em in zip(self.weights, self._elem_masks):
            if w and em:
                out += w * ((masks & em) != 0)
        return out

    def params(self):
        return {"covers": [list(c) for c in self.covers], "weights": list(self.weights)}


class XOSValuation(Valuation):
    """Maximum over additive clauses."""

    kind = "xos"

    def __init__(self, clauses, denominator: int = 1):
        clauses = [[int(x) for x in c] for c in clauses]
        if not clauses or len({len(c) for c in clauses}) != 1:
            raise MalformedInput("xos needs at least one clause, all of length m")
        if any(x < 0 for c in clauses for x in c):
            raise MalformedInput("xos clause weights must be nonnegative")
        super().__init__(len(clauses[0]), denominator)
        self.clauses = clauses

    def _eval(self, mask):
        its = items_of(mask)
        return max(sum(c[j] for j in its) for c in self.clauses)

    def _values(self, masks):
        bits = ((masks[:, None] >> np.arange(self.m)) & 1).astype(np.int64)
        return (bits @ np.array(self.clauses, dtype=np.int64).T).max(axis=1)

    def params(self):
        return {"clauses": [list(c) for c in self.clauses]}


class MildDesiresValuation(Valuation):
    """2|G| below size a, 2a above, and 2a - [G not in family] at size exactly a."""

    kind = "mild_desires"

    def __init__(self, a: int, family, m: int, denominator: int = 1):
        super().__init__(m, denominator)
        a = int(a)
        fam = [as_mask(F, m) for F in family]
        if not fam:
            raise MalformedInput("mild-desires family must be nonempty")
        for F in fam:
            if bin(F).count("1") != a:
                raise MalformedInput(f"family member {items_of(F)} does not have size a={a}")
        if a > m:
            raise MalformedInput("target size a exceeds m")
        self.a = a
        self.family = sorted(set(fam))
        self._fam = set(self.family)

    def _eval(self, mask):
        size = bin(mask).count("1")
        if size < self.a:
            return 2 * size
        if size > self.a:
            return 2 * self.a
        return 2 * size - (mask not in self._fam)

    def _values(self, masks):
        pc = _popcount_array(masks)
        out = np.where(pc < self.a, 2 * pc, 2 * self.a).astype(np.int64)
        out[pc == self.a] -= 1
        out[np.isin(masks, np.array(self.family, dtype=np.int64))] += 1
        return out

    def satisfied(self, S) -> bool:
        return self.value(S) == 2 * self.a

    def params(self):
        return {"a": self.a, "family": [items_of(F) for F in self.family], "m": self.m}


class AlmostSingleMindedValuation(Valuation):
    """[target subset of S] + |S|/m^3, stored over denominator m^3."""

    kind = "almost_single_minded"

    def __init__(self, target, m: int):
        super().__init__(m, denominator=max(1, m ** 3))
        self.target = as_mask(target, m)

    def _eval(self, mask):
        return self.denominator * ((mask & self.target) == self.target) + bin(mask).count("1")

    def _values(self, masks):
        hit = ((masks & self.target) == self.target).astype(np.int64)
        return self.denominator * hit + _popcount_array(masks)

    def params(self):
        return {"target": items_of(self.target), "m": self.m}


class InducedSingleMindedValuation(Valuation):
    """1 if the award contains the target set, else 0."""

    kind = "induced_single_minded"

    def __init__(self, target, m: int, denominator: int = 1):
        super().__init__(m, denominator)
        self.target = as_mask(target, m)

    def _eval(self, mask):
        return int((mask & self.target) == self.target)

    def _values(self, masks):
        return ((masks & self.target) == self.target).astype(np.int64)

    def params(self):
        return {"target": items_of(self.target), "m": self.m}


class ExplicitValuation(Valuation):
    """Dense table of length 2**m; validated nonnegative, zero at the empty set, monotone."""

    kind = "explicit"

    def __init__(self, table, denominator: int = 1, validate: bool = True):
        tab = np.asarray(table, dtype=np.int64)
        size = tab.shape[0] if tab.ndim == 1 else -1
        m = size.bit_length() - 1
        if size <= 0 or (1 << m) != size:
            raise MalformedInput("explicit table length must be a power of two")
        super().__init__(m, denominator)
        if validate:
            if tab[0] != 0 or np.any(tab < 0):
                raise MalformedInput("explicit table must be nonnegative with v(empty)=0")
            if not _monotone(tab, m):
                raise MalformedInput("explicit table is not monotone")
        tab = tab.copy()
        tab.setflags(write=False)
        self.__dict__["table"] = tab

    def _eval(self, mask):
        return int(self.table[mask])

    def params(self):
        return {"table": self.table.tolist()}


def additive(weights, denominator=1):
    return AdditiveValuation(weights, denominator)


def coverage(covers, weights=None, denominator=1):
    return CoverageValuation(covers, weights, denominator)


def xos(clauses, denominator=1):
    return XOSValuation(clauses, denominator)


def mild_desires(a, family, m, denominator=1):
    return MildDesiresValuation(a, family, m, denominator)


def almost_single_minded(target, m):
    return AlmostSingleMindedValuation(target, m)


def induced_single_minded(B_i, m):
    return InducedSingleMindedValuation(B_i, m)


def explicit(table, denominator=1):
    return ExplicitValuation(table, denominator)


def zero(m):
    return ExplicitValuation(np.zeros(1 << m, dtype=np.int64), validate=False)


def grand_bundle_only(m, amount):
    tab = np.zeros(1 << m, dtype=np.int64)
    tab[-1] = int(amount)
    return ExplicitValuation(tab, validate=False)


_KINDS = {
    "additive": lambda d, m: AdditiveValuation(d["weights"]),
    "coverage": lambda d, m: CoverageValuation(d["covers"], d.get("weights")),
    "xos": lambda d, m: XOSValuation(d["clauses"]),
    "mild_desires": lambda d, m: MildDesiresValuation(d["a"], d["family"], d.get("m", m)),
    "almost_single_minded": lambda d, m: AlmostSingleMindedValuation(d["target"], d.get("m", m)),
    "induced_single_minded": lambda d, m: InducedSingleMindedValuation(d["target"], d.get("m", m)),
    "explicit": lambda d, m: ExplicitValuation(d["table"]),
}


def from_spec(spec: dict, m: int) -> Valuation:
    try:
        build = _KINDS[spec["type"]]
    except KeyError:
        raise MalformedInput(f"unknown valuation type {spec.get('type')!r}") from None
    v = build(spec, m)
    if v.m != m:
        raise MalformedInput(f"{spec['type']} bidder has m={v.m}, instance has m={m}")
    return v


def common_scale(valuations):
    """Rescale valuations to a shared denominator (the lcm of theirs)."""
    den = int(np.lcm.reduce([v.denominator for v in valuations])) if valuations else 1
    return [v.scaled(den // v.denominator) for v in valuations], den


def value(v: Valuation, S, ledger=None, bidder: int = 0) -> int:
    return v.value(S, ledger=ledger, bidder=bidder)


class QueryLedger:
    """Distinct value queries per bidder; repeats are counted once."""

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self._seen = [np.zeros(1 << m, dtype=bool) for _ in range(n)]

    def record(self, bidder: int, masks) -> None:
        self._seen[bidder][np.asarray(masks, dtype=np.int64)] = True

    def count(self, bidder: int) -> int:
        return int(self._seen[bidder].sum())

    def counts(self) -> list[int]:
        return [int(s.sum()) for s in self._seen]

    def queried(self, bidder: int) -> list[int]:
        return np.nonzero(self._seen[bidder])[0].tolist()

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.counts())


# --- class membership -------------------------------------------------------

def _monotone(tab, m):
    idx = np.arange(1 << m, dtype=np.int64)
    for j in range(m):
        lo = idx[(idx >> j) & 1 == 0]
        if np.any(tab[lo | (1 << j)] < tab[lo]):
            return False
    return True


def _submodular_local(tab, m):
    # f(S+j) + f(S+k) >= f(S+j+k) + f(S) for all S and j, k outside S
    idx = np.arange(1 << m, dtype=np.int64)
    for j in range(m):
        for k in range(j + 1, m):
            S = idx[((idx >> j) & 1 == 0) & ((idx >> k) & 1 == 0)]
            bj, bk = 1 << j, 1 << k
            if np.any(tab[S | bj] + tab[S | bk] < tab[S | bj | bk] + tab[S]):
                return False
    return True


def _subadditive(tab, m):
    if _monotone(tab, m):
        # disjoint pairs suffice for monotone functions
        return bool(kernels.subadditive_disjoint(tab, m))
    if m > 12:
        raise ScaleRefused("subadditivity of a non-monotone function is only checked at m<=12")
    idx = np.arange(1 << m, dtype=np.int64)
    for S in range(1 << m):
        if np.any(tab[S | idx] > tab[S] + tab):
            return False
    return True


def _xos(tab, m):
    # each S needs a nonnegative additive clause a with a(S)=v(S) and a(T)<=v(T), T subset S
    if not _monotone(tab, m):
        return False
    for S in range(1, 1 << m):
        its = items_of(S)
        subs = [T for T in range(1, 1 << m) if T & S == T]
        A = np.array([[(T >> j) & 1 for j in its] for T in subs], dtype=float)
        b = np.array([tab[T] for T in subs], dtype=float)
        res = linprog(-np.ones(len(its)), A_ub=A, b_ub=b, bounds=(0, None), method="highs")
        if res.status != 0 or -res.fun < tab[S] - 1e-7 * max(1.0, float(tab[S])):
            return False
    return True


_CHECKS = {
    "monotone": _monotone,
    "subadditive": _subadditive,
    "submodular": _submodular_local,
    "xos": _xos,
}


def check_class(v: Valuation, cls: str) -> bool:
    if cls not in _CHECKS:
        raise MalformedInput(f"unknown class {cls!r}")
    limit = XOS_BUDGET if cls == "xos" else CHECK_BUDGET
    if v.m > limit:
        raise ScaleRefused(f"{cls} check refused at m={v.m} (limit {limit})")
    return bool(_CHECKS[cls](v.table, v.m))


__all__ = [
    "Valuation", "AdditiveValuation", "CoverageValuation", "XOSValuation",
    "MildDesiresValuation", "AlmostSingleMindedValuation", "InducedSingleMindedValuation",
    "ExplicitValuation", "QueryLedger", "additive", "coverage", "xos", "mild_desires",
    "almost_single_minded", "induced_single_minded", "explicit", "zero", "grand_bundle_only",
    "from_spec", "common_scale", "value", "check_class", "mask_of", "full_mask",
]
