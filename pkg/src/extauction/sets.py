"""Bitmask helpers for winner sets.

A winner set over agents ``0..n-1`` is canonically an int bitmask: bit ``i``
set means agent ``i`` is in the set.  Python ints are arbitrary precision, so
masks work for any ``n``; they are hashable, cheap to compare, and make
subset enumeration fast.
"""

from __future__ import annotations

from typing import Iterable, Iterator


def mask_of(agents: Iterable[int]) -> int:
    """Build a mask from agent ids."""
    m = 0
    for i in agents:
        m |= 1 << i
    return m


def full_mask(n: int) -> int:
    return (1 << n) - 1


def members(mask: int) -> tuple[int, ...]:
    """Agent ids in the mask, ascending."""
    return tuple(iter_members(mask))


def iter_members(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def contains(mask: int, i: int) -> bool:
    return (mask >> i) & 1 == 1


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask
