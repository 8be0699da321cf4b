"""Shared reference data and helpers for the suite."""

from __future__ import annotations

import random

import pytest

from secrecast import demo
from secrecast.gf2 import BitVector
from secrecast.keying import InitialKey, KeySet, Permutation

# The stored sixth map repeats index 2 and misses 1; swapping the duplicate
# for the missing index restores a bijection and selects an equal mask bit,
# so the derived row is unchanged.
CORRECTED_MAP_6 = (3, 2, 5, 6, 7, 1, 4)


def reference_keyset() -> KeySet:
    """All seven reference keys, with the erratum map corrected."""
    maps = list(demo.REFERENCE_MAPS)
    maps[5] = CORRECTED_MAP_6
    return KeySet(
        tuple(
            InitialKey(Permutation(m), BitVector(k))
            for m, k in zip(maps, demo.REFERENCE_MASKS)
        )
    )


def reference_valid_keys() -> list[InitialKey]:
    """The six reference keys whose stored maps are valid permutations."""
    return [
        InitialKey(Permutation(m), BitVector(k))
        for i, (m, k) in enumerate(zip(demo.REFERENCE_MAPS, demo.REFERENCE_MASKS))
        if i != demo.ERRATUM_ROW - 1
    ]


class RiggedRandom:
    """Random-like source whose first getrandbits calls return scripted
    values, then delegates to a seeded random.Random."""

    def __init__(self, scripted, seed=0):
        self._inner = random.Random(seed)
        self._scripted = list(scripted)

    def getrandbits(self, k):
        if self._scripted:
            return self._scripted.pop(0)
        return self._inner.getrandbits(k)

    def __getattr__(self, name):
        return getattr(self._inner, name)


def brute_force_rank(rows: list[int], cols: int) -> int:
    """Rank via row-space enumeration: the span of r rows has 2^rank points."""
    span = set()
    for mask in range(1 << len(rows)):
        v = 0
        for i in range(len(rows)):
            if (mask >> i) & 1:
                v ^= rows[i]
        span.add(v)
    return len(span).bit_length() - 1


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
