"""Random instance families and the JSON instance file."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import valuations as V
from .errors import MalformedInput, ScaleRefused
from .partitions import rng_for

GEN_BUDGET = 20  # largest m for random explicit tables
KINDS = ("additive", "coverage", "xos", "mild_desires", "single_minded",
         "almost_single_minded", "explicit")


@dataclass
class Instance:
    m: int
    valuations: list
    seed: int | None = None
    kind: str | None = None

    @property
    def n(self) -> int:
        return len(self.valuations)

    @property
    def denominator(self) -> int:
        return int(np.lcm.reduce([v.denominator for v in self.valuations])) if self.valuations else 1

    def to_dict(self) -> dict:
        out = {"m": self.m, "denominator": self.denominator,
               "bidders": [v.to_spec() for v in self.valuations]}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.kind is not None:
            out["kind"] = self.kind
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        try:
            m = int(d["m"])
            bidders = d["bidders"]
        except (KeyError, TypeError, ValueError):
            raise MalformedInput("instance needs integer 'm' and a 'bidders' list") from None
        vals = [V.from_spec(b, m) for b in bidders]
        inst = cls(m, vals, d.get("seed"), d.get("kind"))
        if "denominator" in d and int(d["denominator"]) != inst.denominator:
            raise MalformedInput(f"declared denominator {d['denominator']} != {inst.denominator}")
        return inst

    @classmethod
    def loads(cls, text: str) -> "Instance":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedInput(f"instance file is not valid JSON: {e}") from None
        return cls.from_dict(d)


def load_instance(path) -> Instance:
    with open(path) as f:
        return Instance.loads(f.read())


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as f:
        f.write(inst.dumps())


# --- random valuations -------------------------------------------------------

def _random_set(rng, m, size):
    return sorted(rng.choice(m, size=size, replace=False).tolist())


def random_table(m: int, rng, high: int = 20) -> np.ndarray:
    """Random monotone table: max of random values over subsets."""
    if m > GEN_BUDGET:
        raise ScaleRefused(f"random explicit table refused at m={m} > {GEN_BUDGET}")
    tab = rng.integers(0, high + 1, size=1 << m).astype(np.int64)
    tab[0] = 0
    idx = np.arange(1 << m, dtype=np.int64)
    for j in range(m):
        lo = idx[(idx >> j) & 1 == 0]
        hi = lo | (1 << j)
        tab[hi] = np.maximum(tab[hi], tab[lo])
    return tab


def random_valuation(kind: str, m: int, rng, **params) -> V.Valuation:
    """One random bidder of the given family; ``params`` tune the family."""
    high = int(params.get("high", 10))
    if kind == "additive":
        if "weight" in params:
            return V.additive([int(params["weight"])] * m)
        return V.additive(rng.integers(0, high + 1, size=m).tolist())
    if kind == "coverage":
        universe = int(params.get("universe", 2 * m))
        p = float(params.get("density", 0.3))
        covers = [np.nonzero(rng.random(universe) < p)[0].tolist() for _ in range(m)]
        weights = rng.integers(1, high + 1, size=universe).tolist()
        return V.coverage(covers, weights)
    if kind == "xos":
        c = int(params.get("clauses", 3))
        return V.xos(rng.integers(0, high + 1, size=(c, m)).tolist())
    if kind == "mild_desires":
        a = int(params.get("a", max(1, m // 2)))
        size = int(params.get("family_size", 2))
        fam = {tuple(_random_set(rng, m, a)) for _ in range(size)}
        return V.mild_desires(a, sorted(fam), m)
    if kind == "almost_single_minded":
        size = int(params.get("target_size", max(1, m // 4)))
        return V.almost_single_minded(_random_set(rng, m, size), m)
    if kind == "single_minded":
        size = int(params.get("target_size", max(1, m // 4)))
        return V.induced_single_minded(_random_set(rng, m, size), m)
    if kind == "explicit":
        return V.explicit(random_table(m, rng, int(params.get("high", 20))))
    raise MalformedInput(f"unknown instance kind {kind!r}")


def hard_partition(m: int, k: int, rng):
    """Uniform partition of the items into parts of size max(1, k//2); any residue is
    handed out round-robin."""
    if m < 1 or k < 1:
        raise MalformedInput("need m >= 1 and k >= 1")
    part = max(1, k // 2)
    n = max(1, m // part)
    perm = rng.permutation(m).tolist()
    parts = [perm[i * part:(i + 1) * part] for i in range(n)]
    for j, item in enumerate(perm[n * part:]):
        parts[j % n].append(item)
    return [sorted(p) for p in parts]


def gen_instance(kind: str, m: int, n: int | None, seed: int = 0, **params) -> Instance:
    """Reproducible instance; ``single_minded`` with ``k`` gives the disjoint hard family."""
    if kind not in KINDS:
        raise MalformedInput(f"unknown instance kind {kind!r}")
    if m < 1:
        raise MalformedInput("m must be at least 1")
    rng = rng_for(seed, m, KINDS.index(kind))
    if kind == "single_minded" and "k" in params:
        parts = hard_partition(m, int(params["k"]), rng)
        if n is not None and n != len(parts):
            raise MalformedInput(f"k={params['k']} at m={m} fixes n={len(parts)}, got n={n}")
        return Instance(m, [V.induced_single_minded(p, m) for p in parts], seed, kind)
    if n is None or n < 1:
        raise MalformedInput("n must be at least 1")
    return Instance(m, [random_valuation(kind, m, rng, **params) for _ in range(n)], seed, kind)


__all__ = ["Instance", "KINDS", "gen_instance", "random_valuation", "random_table",
           "hard_partition", "load_instance", "save_instance"]
