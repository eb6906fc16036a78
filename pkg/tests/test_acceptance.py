"""Acceptance gate.  Each test prints one ``[PASS]``/``[FAIL]`` line with its measured
numbers and wall time, then asserts.  Run alone with

    pytest tests/test_acceptance.py -v -s
"""
import itertools
import math
import time

import numpy as np
import pytest

from mirauction import valuations as V
from mirauction.banks import chunking_bank, complete_bank
from mirauction.bits import mask_of
from mirauction.cli import main
from mirauction.instances import gen_instance
from mirauction.mechanisms import (
    ChunkInstance, bucket_shattering_mechanism, chunking_list, chunking_mechanism, dp_optimize,
    efficient_bucket_shattering_mechanism,
)
from mirauction.partitions import find_r_itemizing
from mirauction.verify import (
    brute_force_opt, check_d_shatters, check_truthful, cyclic_family, embedding_sweep,
    exhaustive_opt, misreport_deviations,
)

pytestmark = pytest.mark.acceptance

MONOTONE_KINDS = ["additive", "coverage", "xos", "mild_desires", "single_minded",
                  "almost_single_minded", "explicit"]
SUBADDITIVE_KINDS = ["additive", "coverage", "xos", "mild_desires"]


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail, started, limit):
        elapsed = time.perf_counter() - started
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\n[{status}] criterion {criterion}: {detail} ({elapsed:.1f}s, limit {limit}s)")
        return within
    return emit


# --- 1 and 9 -------------------------------------------------------------------------------

def test_criterion_1_chunking_guarantee_and_9_query_bound(report):
    start = time.perf_counter()
    violations, query_over, runs = [], [], 0
    for m, n, k in itertools.product([8, 12], [2, 3, 4], [1, 2, 3]):
        L = chunking_list(m, k)
        assert L.certificate == f"r_itemizing:{L.t}" and L.t == min(4 * k, m)
        bound = L.z * 2 ** (4 * k) + 1
        for trial in range(200):
            kind = MONOTONE_KINDS[trial % len(MONOTONE_KINDS)]
            inst = gen_instance(kind, m, n, seed=1000 * trial + 10 * m + n + k)
            out = chunking_mechanism(inst.valuations, m, k)
            opt = brute_force_opt(inst.valuations).welfare
            runs += 1
            if out.welfare * m < opt * k:
                violations.append((m, n, k, trial, out.welfare, opt))
            if max(out.queries) > bound:
                query_over.append((m, n, k, trial, max(out.queries), bound))
    within = report(1, not violations, f"{runs} runs, {len(violations)} violations of welfare*(m/k) >= OPT",
                    start, 300)
    report(9, not query_over, f"{runs} runs, {len(query_over)} exceed z*2^(4k)+1 queries", start, 300)
    assert not violations, violations[:5]
    assert not query_over, query_over[:5]
    assert within


# --- 2 ---------------------------------------------------------------------------------------

def test_criterion_2_dp_equals_exhaustive(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    mismatches = []
    for trial in range(500):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 4))
        kind = MONOTONE_KINDS[trial % len(MONOTONE_KINDS)]
        vals, _ = V.common_scale(gen_instance(kind, m, n, seed=trial).valuations)
        _, got = dp_optimize(ChunkInstance(tuple(1 << j for j in range(m)), vals))
        want = exhaustive_opt(vals)
        if got != want:
            mismatches.append((trial, m, n, got, want))
    within = report(2, not mismatches, f"500 instances, {len(mismatches)} mismatches", start, 120)
    assert not mismatches, mismatches[:5]
    assert within


# --- 3 and 4 ---------------------------------------------------------------------------------

TRUTH_SETUPS = {
    # mechanism: (m, k, n)
    "chunking": (8, 1, 3),
    "bucket-shattering": (16, 1, 2),
    "efficient-bs": (16, 1, 2),
}


def _mechanism(name, m, k, seed):
    if name == "chunking":
        return lambda vals: chunking_mechanism(vals, m, k, seed=seed)
    if name == "bucket-shattering":
        return lambda vals: bucket_shattering_mechanism(vals, m, k, seed=seed)
    return lambda vals: efficient_bucket_shattering_mechanism(vals, m, k, seed=seed)


def test_criterion_3_truthful_and_4_individually_rational(report):
    start = time.perf_counter()
    failures, ir_failures, deviations, runs = [], [], 0, 0
    for name, (m, k, n) in TRUTH_SETUPS.items():
        for trial in range(100):
            kind = MONOTONE_KINDS[trial % len(MONOTONE_KINDS)]
            inst = gen_instance(kind, m, n, seed=trial)
            res = check_truthful(_mechanism(name, m, k, trial), inst.valuations,
                                 misreport_deviations(inst.valuations, 100, seed=trial))
            deviations += res.checked
            runs += res.runs
            if not res.passed:
                failures.append((name, trial, res.violations[:2]))
            if res.ir_violations:
                ir_failures.append((name, trial, res.ir_violations[:2]))
    within = report(3, not failures,
                    f"{deviations} misreports over 3 mechanisms x 100 instances, {len(failures)} instances "
                    "with a profitable deviation", start, 600)
    report(4, not ir_failures, f"{runs} runs, {len(ir_failures)} instances with p_i < 0 or p_i > v_i(A_i)",
           start, 600)
    assert not failures, failures[:3]
    assert not ir_failures, ir_failures[:3]
    assert within


# --- 5 ---------------------------------------------------------------------------------------

def test_criterion_5_shattering(report):
    start = time.perf_counter()
    m, r, n = 10, 4, 3
    L = chunking_list(m, 1)
    assert L.t == r and L.certificate == f"r_itemizing:{r}"
    bank = chunking_bank(L, n)
    failed, checked = [], 0
    for size in range(r + 1):
        for S in itertools.combinations(range(m), size):
            w = check_d_shatters(bank, mask_of(S), range(n), n)
            checked += 1
            if not w.verified:
                failed.append(S)
    within = report(5, not failed, f"{checked} item sets of size <= {r} at m={m}, n={n}, "
                    f"{len(failed)} not {n}-shattered", start, 300)
    assert not failed, failed[:5]
    assert within


# --- 6 -------------------------------------------------------------------------------------

def _mixed_disjoint_selection_exists(family):
    n, z = family[0].n, len(family)
    for sel in itertools.product(range(z), repeat=n):
        if len(set(sel)) > 1:
            picks = [family[l].bundles[i] for i, l in enumerate(sel)]
            if all(a & b == 0 for a, b in itertools.combinations(picks, 2)):
                return True
    return False


def test_criterion_6_embedding(report):
    start = time.perf_counter()
    cases, exceptions = 0, 0
    for n in (2, 3):
        family = cyclic_family(n)
        assert len(family) == 2 and not _mixed_disjoint_selection_exists(family)
        rep = embedding_sweep(complete_bank(n, n), family)
        cases += rep.cases
        exceptions += len(rep.exceptions)
    within = report(6, exceptions == 0, f"{cases} X-tuples at z=2, n in {{2,3}}, {exceptions} exceptions",
                    start, 60)
    assert exceptions == 0
    assert within


# --- 7 ---------------------------------------------------------------------------------------

def _itemizes_every_subset(L, r):
    labels = L.labels_matrix()  # (z, m)
    combos = np.array(list(itertools.combinations(range(L.m), r)), dtype=np.int64)
    covered = np.zeros(len(combos), dtype=bool)
    for row in labels:
        lab = np.sort(row[combos], axis=1)
        covered |= np.all(lab[:, 1:] != lab[:, :-1], axis=1)
    return bool(covered.all())


def test_criterion_7_itemizing_sampler(report):
    from mirauction.errors import SearchFailed
    start = time.perf_counter()
    certified, rechecked, zs = 0, 0, []
    for seed in range(100):
        try:
            L = find_r_itemizing(16, 8, 4, z_max=4096, seed=seed)
        except SearchFailed:
            continue
        if L.z <= 4096:
            certified += 1
            zs.append(L.z)
            rechecked += _itemizes_every_subset(L, 4)
    ok = certified >= 95 and rechecked == certified
    within = report(7, ok, f"{certified}/100 seeds certified within z<=4096, {rechecked} re-verified, "
                    f"z median {int(np.median(zs)) if zs else 0} max {max(zs, default=0)}", start, 300)
    assert certified >= 95
    assert rechecked == certified
    assert within


# --- 8 ---------------------------------------------------------------------------------------

def test_criterion_8_bucket_shattering_sanity(report):
    start = time.perf_counter()
    m, k = 16, 1
    root = math.sqrt(m / k)
    constants, good, eff_over = [], 0, []
    for trial in range(200):
        n = 1 + trial % 4
        kind = SUBADDITIVE_KINDS[trial % len(SUBADDITIVE_KINDS)]
        inst = gen_instance(kind, m, n, seed=trial)
        assert all(V.check_class(v, "subadditive") for v in inst.valuations)
        opt = brute_force_opt(inst.valuations).welfare
        full = bucket_shattering_mechanism(inst.valuations, m, k, seed=trial)
        eff = efficient_bucket_shattering_mechanism(inst.valuations, m, k, seed=trial)
        c = 0.0 if opt == 0 else (math.inf if full.welfare == 0 else opt / (full.welfare * root))
        constants.append(c)
        # welfare >= OPT / (4 sqrt(m/k)), exactly
        if 4 * 4 * full.welfare * full.welfare * (m // k) >= opt * opt or opt == 0:
            good += 1
        if eff.welfare > full.welfare:
            eff_over.append((trial, eff.welfare, full.welfare))
    frac = good / 200
    ok = frac >= 0.95 and not eff_over
    within = report(8, ok, f"{good}/200 with c <= 4 (worst c = {max(constants):.3f}, "
                    f"mean c = {np.mean(constants):.3f}); efficient > unrestricted in {len(eff_over)}/200",
                    start, 900)
    assert frac >= 0.95
    assert not eff_over, eff_over[:5]
    assert within


# --- 10 --------------------------------------------------------------------------------------

def test_criterion_10_determinism(report, tmp_path):
    start = time.perf_counter()
    inst = tmp_path / "inst.json"
    L = tmp_path / "list.txt"
    commands = {
        "gen": ["gen", "--kind", "coverage", "--m", "8", "--n", "3", "--seed", "7"],
        "partition-find": ["partition-find", "--m", "10", "--t", "4", "--seed", "7"],
        "run": ["run", "--instance", inst, "--opt", "--format", "csv"],
        "run-bs": ["run", "--instance", inst, "--mechanism", "efficient-bs", "--seed", "3"],
        "run-list": ["run", "--instance", inst, "--list", L],
        "opt": ["opt", "--instance", inst],
        "verify-truthful": ["verify", "--suite", "truthful", "--instance", inst, "--misreports", "10"],
        "verify-shatter": ["verify", "--suite", "shatter", "--instance", inst, "--r", "2"],
        "verify-embedding": ["verify", "--suite", "embedding", "--n", "3"],
        "verify-decomposition": ["verify", "--suite", "decomposition", "--instance", inst],
        "sweep": ["sweep", "--m", "8", "--k", "1,2", "--n", "2,3", "--kinds", "additive,xos",
                  "--mechanisms", "chunking,efficient-bs", "--trials", "3", "--seed", "5"],
        "sweep-jobs": ["sweep", "--m", "8", "--k", "1,2", "--n", "2,3", "--kinds", "additive,xos",
                       "--mechanisms", "chunking,efficient-bs", "--trials", "3", "--seed", "5",
                       "--jobs", "2"],
    }
    assert main(["gen", "--kind", "coverage", "--m", "8", "--n", "3", "--seed", "7", "-o", str(inst)]) == 0
    assert main(["partition-find", "--m", "8", "--t", "4", "--seed", "1", "-o", str(L)]) == 0
    outputs, differ = {}, []
    for name, argv in commands.items():
        got = []
        for rep in range(2):
            out = tmp_path / f"{name}.{rep}"
            assert main([str(a) for a in argv] + ["-o", str(out)]) == 0, name
            got.append(out.read_bytes())
        outputs[name] = got[0]
        if got[0] != got[1]:
            differ.append(name)
    # parallel sweep equals serial sweep; report conversion is deterministic too
    if outputs["sweep"] != outputs["sweep-jobs"]:
        differ.append("sweep-vs-jobs")
    src = tmp_path / "sweep.0"
    reps = []
    for rep in range(2):
        out = tmp_path / f"report.{rep}"
        assert main(["report", str(src), "--summarize", "-o", str(out)]) == 0
        reps.append(out.read_bytes())
    if reps[0] != reps[1]:
        differ.append("report")
    within = report(10, not differ, f"{len(commands) + 1} command lines run twice, "
                    f"{len(differ)} non-identical: {differ}", start, 300)
    assert not differ
    assert within
