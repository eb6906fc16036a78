"""Bitmask helpers. Item sets are plain Python ints (bit j set <=> item j in set)."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import MalformedInput


def mask_of(items: Iterable[int]) -> int:
    out = 0
    for j in items:
        out |= 1 << int(j)
    return out


def items_of(mask: int) -> list[int]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def full_mask(m: int) -> int:
    return (1 << m) - 1


def as_mask(S, m: int) -> int:
    """Coerce an int mask or an iterable of item indices to a validated mask."""
    if isinstance(S, (int, np.integer)):
        mask = int(S)
        if mask < 0:
            raise MalformedInput("negative item mask")
    else:
        items = list(S)
        for j in items:
            if int(j) < 0:
                raise MalformedInput(f"negative item index {j}")
        mask = mask_of(items)
    if mask >> m:
        raise MalformedInput(f"item index >= m={m} in set {items_of(mask)}")
    return mask


def submasks(mask: int):
    """Yield every submask of ``mask`` in decreasing numeric order, ending with 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def deposit(mask: int) -> np.ndarray:
    """All submasks of ``mask`` as an increasing int64 array."""
    out = np.zeros(1, dtype=np.int64)
    for j in items_of(mask):
        out = np.concatenate([out, out | np.int64(1 << j)])
    out.sort()
    return out


def popcounts(width: int) -> np.ndarray:
    """popcount of every mask in [0, 2**width)."""
    pc = np.zeros(1 << width, dtype=np.int64)
    for j in range(width):
        pc[1 << j: 1 << (j + 1)] = pc[: 1 << j] + 1
    return pc


def union_table(chunk_masks) -> np.ndarray:
    """For chunk list c_0..c_{t-1}, return u with u[U] = union of chunks indexed by U."""
    t = len(chunk_masks)
    u = np.zeros(1 << t, dtype=np.int64)
    for j, c in enumerate(chunk_masks):
        u[1 << j: 1 << (j + 1)] = u[: 1 << j] | np.int64(c)
    return u
