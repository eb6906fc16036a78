"""Ground-truth oracles and property checkers: brute-force optimum, d-shattering,
truthfulness under unilateral misreports, the heavy/light welfare decomposition,
and the set-disjointness embedding experiment."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import mechanisms
from . import valuations as V
from .banks import Allocation, AllocationBank
from .bits import as_mask, full_mask, items_of, popcount
from .errors import MalformedInput, PreconditionFailed, ScaleRefused
from .instances import hard_partition, random_valuation
from .mechanisms import _dp_on_rows, optimize_over_bank
from .partitions import rng_for

EXHAUSTIVE_BUDGET = 1 << 22
SHATTER_BUDGET = 1 << 20
MISREPORTS = 100


# --- optimum -----------------------------------------------------------------

@dataclass
class OptResult:
    """A fixed optimal allocation; sub-population welfare is read off it, not re-optimized."""

    allocation: Allocation
    welfare: int
    own: tuple  # v_i(A*_i) over the common denominator
    denominator: int = 1

    def opt_of(self, bidders) -> int:
        if isinstance(bidders, int):
            bidders = items_of(bidders)
        return sum(self.own[i] for i in bidders)

    def sizes(self) -> list[int]:
        return [popcount(b) for b in self.allocation.bundles]


def brute_force_opt(valuations, budget: int | None = None) -> OptResult:
    """Exact optimum by subset DP over single items."""
    budget = mechanisms.DP_BUDGET if budget is None else budget
    vals, den = V.common_scale(list(valuations))
    if not vals:
        raise MalformedInput("need at least one bidder")
    m = vals[0].m
    if m > budget:
        raise ScaleRefused(f"brute-force optimum refused at m={m} > {budget}")
    picks, welfare = _dp_on_rows([v.table for v in vals], [1 << j for j in range(m)], budget=budget)
    # with singleton chunks a chunk-index mask is the item mask itself
    A = Allocation(tuple(int(p) for p in picks), m)
    own = tuple(int(v.table[b]) for v, b in zip(vals, A.bundles))
    return OptResult(A, welfare, own, den)


def exhaustive_opt(valuations, budget: int = EXHAUSTIVE_BUDGET) -> int:
    """Optimal welfare by enumerating every owner-per-item assignment (nobody included)."""
    vals, _ = V.common_scale(list(valuations))
    n, m = len(vals), vals[0].m
    if (n + 1) ** m > budget:
        raise ScaleRefused(f"(n+1)^m = {(n + 1) ** m} assignments exceed budget {budget}")
    owners = np.array(list(itertools.product(range(n + 1), repeat=m)), dtype=np.int64).reshape(-1, m)
    weights = np.int64(1) << np.arange(m, dtype=np.int64)
    total = np.zeros(owners.shape[0], dtype=np.int64)
    for i, v in enumerate(vals):
        masks = ((owners == i) * weights).sum(axis=1)
        total += v.table[masks]
    return int(total.max())


# --- shattering ----------------------------------------------------------------

@dataclass
class ShatterWitness:
    items: tuple
    T: tuple | None  # per-item bidder tuples, aligned with ``items``
    verified: bool
    checked: int = 0


def check_d_shatters(bank: AllocationBank, M_prime, N_prime, d: int,
                     budget: int = SHATTER_BUDGET, enum_budget: int | None = None) -> ShatterWitness:
    """Search per-item bidder sets T_j of size d inside N' whose every combination of
    per-item owners is realized by some bank member restricted to M'."""
    sub = as_mask(M_prime, bank.m)
    items = tuple(items_of(sub))
    pool = sorted(items_of(N_prime) if isinstance(N_prime, int) else {int(i) for i in N_prime})
    if any(i < 0 or i >= bank.n for i in pool):
        raise MalformedInput("bidder set N' has out-of-range bidders")
    if d < 1 or d > len(pool):
        return ShatterWitness(items, None, False)
    cost = comb(len(pool), d) ** len(items) * d ** len(items)
    if cost > budget:
        raise ScaleRefused(f"shattering search needs ~{cost} checks (budget {budget})")
    realized = set()
    for A in bank.restrict(sub, enum_budget).allocations:
        owner = {}
        for i, b in enumerate(A.bundles):
            for j in items_of(b):
                owner[j] = i
        realized.add(tuple(owner.get(j, -1) for j in items))
    checked = 0
    choices = list(itertools.combinations(pool, d))
    for T in itertools.product(choices, repeat=len(items)):
        ok = True
        for f in itertools.product(*T):
            checked += 1
            if f not in realized:
                ok = False
                break
        if ok:
            return ShatterWitness(items, T, True, checked)
    return ShatterWitness(items, None, False, checked)


# --- truthfulness --------------------------------------------------------------

@dataclass
class TruthfulnessResult:
    passed: bool
    checked: int
    violations: list = field(default_factory=list)  # (bidder, misreport spec, u_truth, u_lie)
    ir_violations: list = field(default_factory=list)  # (run, bidder, payment, reported value)
    runs: int = 0

    def __bool__(self):
        return self.passed


def _ir_check(out, reported, tag, sink):
    for i, v in enumerate(reported):
        paid = Fraction(out.payments[i], out.denominator)
        got = Fraction(v.value(out.allocation.bundles[i]), v.denominator)
        if paid < 0 or paid > got:
            sink.append((tag, i, paid, got))


def check_truthful(mechanism, valuations, deviations) -> TruthfulnessResult:
    """``mechanism(valuations) -> MechanismOutcome``; ``deviations`` are (bidder, misreport).
    Utilities are compared exactly as fractions of the true valuations."""
    valuations = list(valuations)
    truth = mechanism(valuations)
    res = TruthfulnessResult(True, 0, runs=1)
    _ir_check(truth, valuations, "truth", res.ir_violations)
    u_truth = [truth.utility(i, v) for i, v in enumerate(valuations)]
    for i, lie in deviations:
        reported = valuations[:i] + [lie] + valuations[i + 1:]
        out = mechanism(reported)
        res.runs += 1
        res.checked += 1
        _ir_check(out, reported, res.runs - 1, res.ir_violations)
        u_lie = out.utility(i, valuations[i])
        if u_lie > u_truth[i]:
            res.violations.append((i, lie.to_spec(), u_truth[i], u_lie))
    res.passed = not res.violations
    return res


def _same_kind(v, rng):
    if v.kind == "mild_desires":
        return random_valuation("mild_desires", v.m, rng, a=v.a, family_size=len(v.family))
    if v.kind in ("almost_single_minded", "induced_single_minded"):
        kind = "single_minded" if v.kind == "induced_single_minded" else v.kind
        return random_valuation(kind, v.m, rng, target_size=popcount(v.target))
    if v.kind in ("additive", "coverage", "xos", "explicit"):
        return random_valuation(v.kind, v.m, rng)
    return random_valuation("explicit", v.m, rng)


def random_misreports(v, count: int = MISREPORTS, seed: int = 0, bidder: int = 0) -> list:
    """Adversarial templates (zero, grand bundle only, scaled truth) then random
    valuations of the same family, ``count`` in total."""
    rng = rng_for(seed, bidder, 17)
    top = int(v.table[-1])
    templates = [
        V.zero(v.m),
        V.grand_bundle_only(v.m, 2 * top + v.denominator),
        V.ExplicitValuation(v.table * 2, denominator=v.denominator, validate=False),
        V.ExplicitValuation(v.table, denominator=2 * v.denominator, validate=False),
    ]
    out = templates[:count]
    while len(out) < count:
        out.append(_same_kind(v, rng))
    return out


def misreport_deviations(valuations, count: int = MISREPORTS, seed: int = 0) -> list:
    return [(i, lie) for i, v in enumerate(valuations) for lie in random_misreports(v, count, seed, i)]


# --- heavy/light decomposition ---------------------------------------------------

@dataclass
class DecompositionReport:
    mode: str
    heavy: tuple
    groups: list
    opt_heavy: int
    opt_light: int
    group_opts: list
    factor: object  # Fraction for chunking, float for bucket mode
    heavy_bound: object
    light_bound: object
    grand_best: int
    dominant: str
    inequality_holds: bool

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.__dict__.items()}


def decomposition_report(valuations, opt: OptResult, k: int, mode: str = "chunking") -> DecompositionReport:
    """Heavy bidders N0 get more than 2k items in A* (at least 2*sqrt(mk) in bucket
    mode); the rest are packed greedily into groups of at most 4k (4*sqrt(mk)) items."""
    vals, _ = V.common_scale(list(valuations))
    m = opt.allocation.m
    if k < 1:
        raise MalformedInput("k must be at least 1")
    sizes = opt.sizes()
    if mode == "chunking":
        heavy_of = lambda a: a > 2 * k
        fits = lambda load: load <= 4 * k
        factor = Fraction(2 * k, m)
    elif mode == "bucket":
        heavy_of = lambda a: a * a >= 4 * m * k
        fits = lambda load: load * load <= 16 * m * k
        factor = 2 * (k / m) ** 0.5
    else:
        raise MalformedInput(f"unknown decomposition mode {mode!r}")
    heavy = tuple(i for i, a in enumerate(sizes) if heavy_of(a))
    groups, cur, load = [], [], 0
    for i, a in enumerate(sizes):
        if i in heavy:
            continue
        if cur and not fits(load + a):
            groups.append(cur)
            cur, load = [], 0
        cur.append(i)
        load += a
    if cur:
        groups.append(cur)
    light = [i for i in range(len(sizes)) if i not in heavy]
    opt_heavy, opt_light = opt.opt_of(heavy), opt.opt_of(light)
    full = full_mask(m)
    grand_best = max(int(v.table[full]) for v in vals)
    if opt_light == 0 and heavy:
        dominant = "grand-bundle"
    elif not heavy:
        dominant = "light-groups"
    else:
        dominant = "grand-bundle" if opt_heavy >= opt_light else "light-groups"
    return DecompositionReport(
        mode, heavy, groups, opt_heavy, opt_light, [opt.opt_of(g) for g in groups], factor,
        factor * opt_heavy, factor * opt_light, grand_best, dominant,
        # max of the two branches is at least half of their sum, which is OPT
        2 * max(opt_heavy, opt_light) >= opt.welfare)


# --- set-disjointness embedding ---------------------------------------------------

@dataclass
class DisjointnessInstance:
    base: list  # Allocations B^(1..z)
    X: tuple  # per bidder, a frozenset of indices into base
    V: tuple  # participating bidders
    sizes: tuple  # a_i
    s: int
    valuations: list

    @property
    def z(self) -> int:
        return len(self.base)

    def intersecting(self) -> bool:
        common = set(range(self.z))
        for i in self.V:
            common &= self.X[i]
        return bool(common)


def _base_sizes(base_allocs):
    if not base_allocs:
        raise MalformedInput("need at least one base allocation")
    n, m = base_allocs[0].n, base_allocs[0].m
    sizes = tuple(popcount(b) for b in base_allocs[0].bundles)
    for B in base_allocs:
        if B.n != n or B.m != m:
            raise MalformedInput("base allocations disagree on n or m")
        if tuple(popcount(b) for b in B.bundles) != sizes:
            raise MalformedInput("each bidder's award size must be the same in every base allocation")
    return sizes


def build_disjointness_instance(bank: AllocationBank | None, base_allocs, X, V_set=None) -> DisjointnessInstance:
    """Mild-desires bidders: bidder i wants any of its awards B^(l)_i with l in X_i.
    Bidders outside V, or with empty awards, get X_i = all of [z]."""
    base = list(base_allocs)
    sizes = _base_sizes(base)
    n, m, z = base[0].n, base[0].m, len(base)
    if bank is not None:
        if (bank.n, bank.m) != (n, m):
            raise MalformedInput("bank and base allocations disagree on n or m")
        for B in base:
            if not bank.contains(B):
                raise MalformedInput("base allocation is not a bank member")
    V_set = set(range(n)) if V_set is None else {int(i) for i in V_set}
    V_eff = tuple(sorted(i for i in V_set if sizes[i] > 0))
    X = list(X)
    if len(X) != n:
        raise MalformedInput(f"need one input set per bidder ({n}), got {len(X)}")
    Xs = []
    for i in range(n):
        if i in V_eff:
            xi = frozenset(int(l) for l in X[i])
            if not xi or any(l < 0 or l >= z for l in xi):
                raise MalformedInput(f"input set of bidder {i} must be a nonempty subset of [z]")
        else:
            xi = frozenset(range(z))
        Xs.append(xi)
    vals = []
    for i in range(n):
        if sizes[i] == 0:
            vals.append(V.zero(m))
        else:
            vals.append(V.mild_desires(sizes[i], [base[l].bundles[i] for l in sorted(Xs[i])], m))
    return DisjointnessInstance(base, tuple(Xs), V_eff, sizes, sum(sizes), vals)


def no_mixing(base_allocs, V_set=None) -> bool:
    """True if no selection of awards (bidder i takes B^(l_i)_i), with l non-constant
    on V, is pairwise disjoint.  Bidders with empty awards are ignored."""
    base = list(base_allocs)
    sizes = _base_sizes(base)
    n, z = base[0].n, len(base)
    active = [i for i in range(n) if sizes[i] > 0]
    V_eff = [i for i in (range(n) if V_set is None else V_set) if sizes[i] > 0]
    if z ** len(active) > EXHAUSTIVE_BUDGET:
        raise ScaleRefused(f"no-mixing check needs z^n = {z ** len(active)} selections")
    for sel in itertools.product(range(z), repeat=len(active)):
        pick = dict(zip(active, sel))
        if len({pick[i] for i in V_eff}) <= 1:
            continue
        used = 0
        for i in active:
            b = base[pick[i]].bundles[i]
            if b & used:
                break
            used |= b
        else:
            return False
    return True


@dataclass
class EmbeddingReport:
    passed: bool
    cases: int
    exceptions: list = field(default_factory=list)  # (X, welfare, 2s, intersecting)


def verify_embedding(bank: AllocationBank, instances) -> EmbeddingReport:
    """For each instance: (optimal welfare over the bank == 2s) iff the V-inputs intersect."""
    if isinstance(instances, DisjointnessInstance):
        instances = [instances]
    instances = list(instances)
    rep = EmbeddingReport(True, 0)
    checked = {}
    for inst in instances:
        key = (id(inst.base[0]), inst.V)
        if key not in checked:
            checked[key] = no_mixing(inst.base, inst.V)
            if sum(inst.sizes) != bank.m:
                raise PreconditionFailed("awards must cover all items (sum of a_i = m)")
        if not checked[key]:
            raise PreconditionFailed("base allocations admit a mixed pairwise-disjoint selection")
        _, welfare = optimize_over_bank(bank, inst.valuations)
        full = welfare == 2 * inst.s
        rep.cases += 1
        if full != inst.intersecting():
            rep.exceptions.append(([sorted(x) for x in inst.X], welfare, 2 * inst.s, inst.intersecting()))
    rep.passed = not rep.exceptions
    return rep


def all_input_tuples(z: int, bidders) -> list:
    """Every assignment of a nonempty subset of [z] to each listed bidder."""
    subsets = [frozenset(c) for r in range(1, z + 1) for c in itertools.combinations(range(z), r)]
    return list(itertools.product(subsets, repeat=len(bidders)))


def embedding_sweep(bank: AllocationBank, base_allocs, V_set=None) -> EmbeddingReport:
    base = list(base_allocs)
    n, z = base[0].n, len(base)
    sizes = _base_sizes(base)
    V_eff = [i for i in (range(n) if V_set is None else sorted(V_set)) if sizes[i] > 0]
    insts = []
    for combo in all_input_tuples(z, V_eff):
        X = [frozenset(range(z))] * n
        for i, xi in zip(V_eff, combo):
            X[i] = xi
        insts.append(build_disjointness_instance(bank, base, X, V_eff))
    return verify_embedding(bank, insts)


def cyclic_family(n: int) -> list:
    """Two awards over m = n items: bidder i gets item i, or item i+1 mod n."""
    ident = Allocation(tuple(1 << i for i in range(n)), n)
    shift = Allocation(tuple(1 << ((i + 1) % n) for i in range(n)), n)
    return [ident, shift]


# --- hard instances -----------------------------------------------------------------

def induced_hard_instance(m: int, k: int, seed: int = 0) -> list:
    """Single-minded bidders for a uniform partition of the items into parts of size k/2."""
    parts = hard_partition(m, k, rng_for(seed, m, k, 52))
    return [V.induced_single_minded(p, m) for p in parts]


__all__ = [
    "OptResult", "brute_force_opt", "exhaustive_opt", "ShatterWitness", "check_d_shatters",
    "TruthfulnessResult", "check_truthful", "random_misreports", "misreport_deviations",
    "DecompositionReport", "decomposition_report", "DisjointnessInstance",
    "build_disjointness_instance", "no_mixing", "EmbeddingReport", "verify_embedding",
    "all_input_tuples", "embedding_sweep", "cyclic_family", "induced_hard_instance",
]
