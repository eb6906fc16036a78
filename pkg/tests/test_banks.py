import itertools

import numpy as np
import pytest

from mirauction.banks import (
    Allocation, ExplicitBank, all_bucketings, bucket_shattering_bank, chunking_bank,
    complete_bank, empty_allocation, explicit_bank, grand_bundle, make_bucket_shattering_params,
    p_bucketing_bank, r_chunking_bank,
)
from mirauction.bits import full_mask, items_of, mask_of
from mirauction.errors import MalformedInput, ScaleRefused
from mirauction.formats import dump_bank, load_bank
from mirauction.partitions import (
    BidderBucketing, Partition, PartitionList, find_r_itemizing, sample_partition,
)


def A(*sets, m):
    return Allocation.from_sets(sets, m)


# --- independent oracles: enumerate member sets straight from the definitions ----

def _chunk_awards(chunks, owners, n):
    out = set()
    for pick in itertools.product([None, *owners], repeat=len(chunks)):
        b = [0] * n
        for c, i in zip(chunks, pick):
            if i is not None:
                b[i] |= c
        out.add(tuple(b))
    return out


def oracle_chunking(L, n):
    out = set()
    for B in L:
        out |= _chunk_awards([c for c in B.chunk_masks if c], range(n), n)
    return out


def oracle_r_chunking(B, r, n):
    chunks = [c for c in B.chunk_masks if c]
    return {b for b in _chunk_awards(chunks, range(n), n)
            if all(sum(1 for c in chunks if c & x) <= r for x in b)}


def oracle_bucketing(params, n, labelings):
    m = params.m
    out = {tuple(full_mask(m) if j == i else 0 for j in range(n)) for i in range(n)}
    for l, outer in enumerate(params.outer):
        for lab in labelings:
            per_bucket = []
            for s in range(params.t):
                owners = [i for i in range(n) if lab[i] == s]
                opts = set()
                Lin = params.inner.get((l, s))
                if Lin is None:
                    opts.add((0,) * n)
                else:
                    for C in Lin:
                        opts |= _chunk_awards([c for c in C.chunk_masks if c], owners, n)
                per_bucket.append(opts)
            for combo in itertools.product(*per_bucket):
                out.add(tuple(sum(x[i] for x in combo) for i in range(n)))
    return out


def every_allocation(n, m):
    for a in itertools.product(range(-1, n), repeat=m):
        yield Allocation.from_assignment(a, n)


def menu_from_members(members, n):
    return [sorted({x.bundles[i] for x in members}) for i in range(n)]


# --- chunking --------------------------------------------------------------------

def test_chunking_examples():
    L = PartitionList([Partition.from_chunks([[0, 1], [2, 3]])])
    bank = chunking_bank(L, 2)
    assert bank.contains(A([0, 1], [2, 3], m=4))
    assert not bank.contains(A([0, 2], [], m=4))
    assert bank.contains(grand_bundle(0, 2, 4))
    assert bank.contains(grand_bundle(1, 2, 4))
    assert bank.contains(empty_allocation(2, 4))


def test_chunking_contains_matches_oracle():
    L = find_r_itemizing(6, 3, 2, seed=1)
    bank = chunking_bank(L, 3)
    members = oracle_chunking(L, 3)
    for x in every_allocation(3, 6):
        assert bank.contains(x) == (x.bundles in members)
    assert {x.bundles for x in bank.members()} == members


def test_chunking_menu():
    L = PartitionList([Partition.from_chunks([[0, 1], [2, 3]])])
    bank = chunking_bank(L, 2)
    assert sorted(bank.menu(0)) == [0, 0b0011, 0b1100, 0b1111]
    L = find_r_itemizing(6, 3, 2, seed=2)
    bank = chunking_bank(L, 2)
    menus = menu_from_members(bank.members(), 2)
    for i in range(2):
        got = sorted(bank.menu(i))
        assert got == menus[i]
        assert len(got) == len(set(got)) <= L.z * 2 ** L.t


def test_wrong_shape_allocation_rejected():
    bank = chunking_bank(PartitionList([Partition.from_chunks([[0, 1], [2, 3]])]), 2)
    with pytest.raises(MalformedInput):
        bank.contains(empty_allocation(3, 4))
    with pytest.raises(MalformedInput):
        list(bank.menu(5))


def test_allocation_overlap_rejected():
    with pytest.raises(MalformedInput):
        Allocation((0b011, 0b110), 3)
    with pytest.raises(MalformedInput):
        Allocation((0b1000,), 3)


# --- r-chunking ------------------------------------------------------------------

def test_r_chunking_full_cap_equals_chunking():
    B = sample_partition(6, 3, seed=4)
    a = {x.bundles for x in r_chunking_bank(B, 3, 2).members()}
    b = {x.bundles for x in chunking_bank(PartitionList([B]), 2).members()}
    assert a == b


def test_r_chunking_zero_only_empty():
    B = sample_partition(5, 3, seed=5)
    assert [x.bundles for x in r_chunking_bank(B, 0, 2).members()] == [(0, 0)]


def test_r_chunking_cap():
    B = Partition.from_chunks([[0, 1], [2, 3]])
    bank = r_chunking_bank(B, 1, 2)
    assert bank.contains(A([0, 1], [2, 3], m=4))
    assert not bank.contains(A([0, 1, 2, 3], [], m=4))
    with pytest.raises(MalformedInput):
        r_chunking_bank(B, 3, 2)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_r_chunking_matches_oracle(r):
    B = sample_partition(6, 3, seed=11)
    bank = r_chunking_bank(B, r, 2)
    members = oracle_r_chunking(B, r, 2)
    for x in every_allocation(2, 6):
        assert bank.contains(x) == (x.bundles in members)
    assert sorted(bank.menu(0)) == menu_from_members(bank.members(), 2)[0]


# --- bucket shattering -----------------------------------------------------------

def test_worked_example_membership(worked):
    bank = bucket_shattering_bank(worked, 4)
    # bucketing 1, chunkings 1a and 2b; bidder 1 alone in bucket a
    assert bank.contains(A([0, 1, 2, 3], [4, 6], [], [5, 7], m=8))
    # bidder 1 would need chunks from both buckets
    assert not bank.contains(A([0, 1, 4, 5], [2, 3], [6, 7], [], m=8))
    for i in range(4):
        assert bank.contains(grand_bundle(i, 4, 8))
    assert bank.contains(empty_allocation(4, 8))


def test_worked_example_contains_matches_oracle(worked):
    n = 3
    bank = bucket_shattering_bank(worked, n)
    members = oracle_bucketing(worked, n, list(itertools.product(range(2), repeat=n)))
    for x in every_allocation(n, 8):
        assert bank.contains(x) == (x.bundles in members)
    assert {x.bundles for x in bank.members()} == members


def test_worked_example_menu(worked):
    bank = bucket_shattering_bank(worked, 2)
    menus = menu_from_members(bank.members(), 2)
    for i in range(2):
        got = sorted(bank.menu(i))
        assert got == menus[i]
        assert full_mask(8) in got
        bound = 1 + worked.z * worked.t * worked.inner_z() * 2 ** 2
        assert len(got) <= bound


def test_p_bucketing_all_equals_unrestricted(worked):
    n = 3
    full = {x.bundles for x in bucket_shattering_bank(worked, n).members()}
    allp = {x.bundles for x in p_bucketing_bank(worked, all_bucketings(n, 2), n).members()}
    assert full == allp


def test_p_bucketing_subset_and_oracle(worked):
    n = 3
    P = [BidderBucketing(np.array([0, 0, 1]), 2)]
    bank = p_bucketing_bank(worked, P, n)
    # shift closure adds (1, 1, 0)
    assert {b.key() for b in bank.bucketings} == {(0, 0, 1), (1, 1, 0)}
    members = {x.bundles for x in bank.members()}
    assert members == oracle_bucketing(worked, n, [(0, 0, 1), (1, 1, 0)])
    assert members <= {x.bundles for x in bucket_shattering_bank(worked, n).members()}
    for x in every_allocation(n, 8):
        assert bank.contains(x) == (x.bundles in members)


def test_p_bucketing_menu_matches_members(worked):
    bank = p_bucketing_bank(worked, [BidderBucketing(np.array([0, 1, 1]), 2)], 3)
    menus = menu_from_members(bank.members(), 3)
    for i in range(3):
        assert sorted(bank.menu(i)) == menus[i]


def test_single_bucket_uses_the_one_bucketing():
    params = make_bucket_shattering_params(8, 1, seed=3)
    assert params.t == 1
    bank = p_bucketing_bank(params, [BidderBucketing(np.array([0, 0]), 1)], 2)
    assert [b.key() for b in bank.bucketings] == [(0, 0)]
    assert {x.bundles for x in bank.members()} == oracle_bucketing(params, 2, [(0, 0)])


def test_generated_params_are_well_formed():
    params = make_bucket_shattering_params(16, 1, seed=0)
    assert params.t == 2 and params.z == 16
    for (l, s), Lin in params.inner.items():
        assert sorted(Lin.items) == items_of(params.outer[l].chunk_masks[s])
        assert Lin.t == min(4, len(Lin.items))
        assert Lin.certificate == f"r_itemizing:{Lin.t}"
    with pytest.raises(MalformedInput):
        make_bucket_shattering_params(3, 1)


def test_params_reject_inner_off_bucket(worked):
    from mirauction.banks import BucketShatteringParams
    inner = dict(worked.inner)
    inner[(0, 0)] = worked.inner[(0, 1)]
    with pytest.raises(MalformedInput):
        BucketShatteringParams(1, 2, worked.outer, inner)


# --- restrict --------------------------------------------------------------------

def test_restrict_examples():
    L = PartitionList([Partition.from_chunks([[0, 1], [2, 3]])])
    bank = chunking_bank(L, 2)
    assert [x.bundles for x in bank.restrict(0).allocations] == [(0, 0)]
    single = explicit_bank([A([0, 1], [2], m=4)])
    assert [x.bundles for x in single.restrict([1, 2]).allocations] == [(0b0010, 0b0100)]
    got = {x.bundles for x in bank.restrict([0, 1]).allocations}
    assert got == {(0, 0), (0b11, 0), (0, 0b11)}


def test_restrict_matches_oracle(worked):
    bank = bucket_shattering_bank(worked, 2)
    sub = mask_of([0, 3, 5, 6])
    got = {x.bundles for x in bank.restrict(sub).allocations}
    want = {tuple(b & sub for b in x.bundles) for x in bank.members()}
    assert got == want


def test_restrict_budget():
    bank = complete_bank(2, 4)
    with pytest.raises(ScaleRefused):
        bank.restrict(15, budget=10)


def test_complete_bank_size():
    assert len(complete_bank(2, 3).allocations) == 27


def test_explicit_contains_and_dedupe():
    x, y = A([0], [1], m=2), A([1], [0], m=2)
    bank = ExplicitBank([x, x, y])
    assert len(bank.allocations) == 2
    assert bank.contains(x) and not bank.contains(A([0, 1], [], m=2))


# --- descriptors -----------------------------------------------------------------

def _same_members(a, b):
    return {x.bundles for x in a.members()} == {x.bundles for x in b.members()}


def test_descriptor_round_trip(worked):
    L = find_r_itemizing(6, 3, 2, seed=7)
    P = [BidderBucketing(np.array([0, 1]), 2)]
    banks = [
        explicit_bank([A([0], [1, 2], m=3), A([], [], m=3)]),
        chunking_bank(L, 2),
        r_chunking_bank(L[0], 2, 2),
        bucket_shattering_bank(worked, 2),
        p_bucketing_bank(worked, P, 2),
    ]
    for bank in banks:
        text = dump_bank(bank, k=1)
        back = load_bank(text)
        assert back.shape == bank.shape
        assert dump_bank(back, k=1) == text
        assert _same_members(bank, back)


def test_descriptor_rejects_garbage():
    with pytest.raises(MalformedInput):
        load_bank("not a bank\n")
    with pytest.raises(MalformedInput):
        load_bank("bank shape=weird n=1 m=1 k=none\n")
