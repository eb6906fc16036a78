"""Plain-text formats for partition lists and bank descriptors.

A partition list is a header line ``m=.. t=.. z=.. certificate=.. seed=..``
(plus ``domain=a,b,..`` for lists over a subset of items) followed by one line
of comma-separated chunk labels per partition.  A bank descriptor is a
``bank shape=.. n=.. m=.. k=..`` header followed by named blocks, each block
being ``begin NAME`` / body / ``end``.
"""
from __future__ import annotations

import numpy as np

from .banks import (
    Allocation, BucketingBank, BucketShatteringParams, ChunkingBank, ExplicitBank, RChunkingBank,
)
from .errors import MalformedInput
from .partitions import BidderBucketing, Partition, PartitionList


def _fields(line: str) -> dict:
    out = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise MalformedInput(f"expected key=value, got {tok!r}")
        out[key] = val
    return out


def _ints(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise MalformedInput(f"bad integer list {text!r}") from None


def _opt(val: str):
    return None if val in ("", "none") else val


def dump_partition_list(L: PartitionList) -> str:
    head = f"m={L.m} t={L.t} z={L.z} certificate={L.certificate or 'none'} seed={L.seed if L.seed is not None else 'none'}"
    if L.partitions[0].domain is not None:
        head += " domain=" + ",".join(map(str, L.items))
    lines = [head] + [",".join(map(str, p.labels.tolist())) for p in L]
    return "\n".join(lines) + "\n"


def load_partition_list(text: str) -> PartitionList:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedInput("empty partition list")
    head = _fields(lines[0])
    try:
        m, t, z = int(head["m"]), int(head["t"]), int(head["z"])
    except (KeyError, ValueError):
        raise MalformedInput("partition list header needs integer m, t and z") from None
    domain = tuple(_ints(head["domain"])) if "domain" in head else None
    rows = [_ints(ln) for ln in lines[1:]]
    if len(rows) != z:
        raise MalformedInput(f"header says z={z} but {len(rows)} partitions follow")
    for r in rows:
        if len(r) != m:
            raise MalformedInput(f"partition line has {len(r)} labels, expected m={m}")
    seed = _opt(head.get("seed", "none"))
    return PartitionList([Partition(np.array(r, dtype=np.int64), t, domain) for r in rows],
                         certificate=_opt(head.get("certificate", "none")),
                         seed=None if seed is None else int(seed))


def _block(name: str, body: str) -> str:
    return f"begin {name}\n{body}end\n"


def _split_blocks(lines):
    blocks, i = [], 0
    while i < len(lines):
        ln = lines[i]
        if not ln.startswith("begin "):
            raise MalformedInput(f"expected 'begin NAME', got {ln!r}")
        name = ln[6:].strip()
        j = i + 1
        while j < len(lines) and lines[j] != "end":
            j += 1
        if j == len(lines):
            raise MalformedInput(f"block {name!r} is not closed")
        blocks.append((name, "\n".join(lines[i + 1:j]) + "\n"))
        i = j + 1
    return blocks


def dump_bank(bank, k: int | None = None) -> str:
    head = f"bank shape={bank.shape} n={bank.n} m={bank.m} k={k if k is not None else 'none'}"
    parts = []
    if isinstance(bank, ExplicitBank):
        head += f" size={len(bank.allocations)}"
        body = "".join(",".join(map(str, A.bundles)) + "\n" for A in bank.allocations)
        parts.append(_block("allocations", body))
    elif isinstance(bank, ChunkingBank):
        parts.append(_block("list", dump_partition_list(bank.L)))
    elif isinstance(bank, RChunkingBank):
        head += f" r={bank.r}"
        parts.append(_block("list", dump_partition_list(PartitionList([bank.B]))))
    elif isinstance(bank, BucketingBank):
        p = bank.params
        head = f"bank shape={bank.shape} n={bank.n} m={bank.m} k={p.k} t={p.t} seed={p.seed if p.seed is not None else 'none'}"
        parts.append(_block("outer", dump_partition_list(p.outer)))
        for (l, s), Lin in sorted(p.inner.items()):
            if Lin is not None:
                parts.append(_block(f"inner {l} {s}", dump_partition_list(Lin)))
        if bank.bucketings is not None:
            body = "".join(",".join(map(str, P.labels.tolist())) + "\n" for P in bank.bucketings)
            parts.append(_block("bucketings", body))
    else:
        raise MalformedInput(f"cannot serialize bank shape {bank.shape}")
    return head + "\n" + "".join(parts)


def load_bank(text: str):
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("bank "):
        raise MalformedInput("bank descriptor must start with a 'bank' header")
    head = _fields(lines[0][5:])
    try:
        shape, n, m = head["shape"], int(head["n"]), int(head["m"])
    except (KeyError, ValueError):
        raise MalformedInput("bank header needs shape, n and m") from None
    blocks = _split_blocks(lines[1:])
    named = dict(blocks)
    if shape == "explicit":
        allocs = [Allocation(tuple(_ints(ln)), m) for ln in named.get("allocations", "").splitlines() if ln]
        return ExplicitBank(allocs, n, m)
    if shape == "chunking":
        return ChunkingBank(load_partition_list(named["list"]), n)
    if shape == "r_chunking":
        return RChunkingBank(load_partition_list(named["list"])[0], int(head["r"]), n)
    if shape in ("bucket_shattering", "p_bucketing"):
        t = int(head["t"])
        inner = {}
        for name, body in blocks:
            if name.startswith("inner "):
                _, l, s = name.split()
                inner[(int(l), int(s))] = load_partition_list(body)
        seed = _opt(head.get("seed", "none"))
        params = BucketShatteringParams(int(head["k"]), t, load_partition_list(named["outer"]), inner,
                                        None if seed is None else int(seed))
        bucketings = None
        if shape == "p_bucketing":
            bucketings = [BidderBucketing(np.array(_ints(ln), dtype=np.int64), t)
                          for ln in named.get("bucketings", "").splitlines() if ln]
        bank = BucketingBank(params, n, bucketings)
        if bank.m != m:
            raise MalformedInput(f"bank header m={m} disagrees with its lists (m={bank.m})")
        return bank
    raise MalformedInput(f"unknown bank shape {shape!r}")


__all__ = ["dump_partition_list", "load_partition_list", "dump_bank", "load_bank"]
