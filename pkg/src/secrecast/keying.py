"""Initial keys, regenerating vectors, and coefficient-row derivation.

Each message i has a fixed secret key: a permutation of {1..n} plus an n-bit
mask.  Composing the mask through the permutation gives the key's base row;
XORing the public per-round regenerating vector into every base row yields
the round's decoding-coefficient matrix.  Keys never change within a session;
only the regenerating vector is redrawn.

Message and permutation indices are 1-based in all external formats (JSON
files, validation reports); bit positions inside BitVectors are 0-based.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from . import gf2
from .errors import DimensionMismatch, KeySetIncoherent
from .gf2 import BitMatrix, BitVector

__all__ = [
    "Permutation",
    "InitialKey",
    "RegenVector",
    "KeySet",
    "KeysetValidation",
    "RoundSample",
    "keygen",
    "base_row",
    "derive_row",
    "assemble_matrix",
    "sample_round_matrix",
    "validate_keyset",
    "keyset_coherent",
    "keyset_to_dict",
    "keyset_from_dict",
    "save_keyset",
    "load_keyset",
]


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..n} in one-line notation: j maps to mapping[j-1]."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mapping", tuple(self.mapping))
        n = len(self.mapping)
        if n < 1:
            raise ValueError("permutation must be nonempty")
        if sorted(self.mapping) != list(range(1, n + 1)):
            raise ValueError(
                f"mapping {list(self.mapping)} is not a bijection of 1..{n}"
            )

    @property
    def n(self) -> int:
        return len(self.mapping)


@dataclass(frozen=True)
class InitialKey:
    """Per-message secret: permutation plus uniform mask, fixed all session."""

    perm: Permutation
    mask: BitVector

    def __post_init__(self):
        if self.perm.n != len(self.mask):
            raise DimensionMismatch(
                f"permutation size {self.perm.n} != mask length {len(self.mask)}"
            )

    @property
    def n(self) -> int:
        return self.perm.n


@dataclass(frozen=True)
class RegenVector:
    """Public per-round n-bit vector XORed into every base row."""

    round: int
    bits: BitVector

    def __post_init__(self):
        if self.round < 0:
            raise ValueError("round must be non-negative")


@dataclass(frozen=True)
class KeySet:
    """The n initial keys of a session; keys[i-1] belongs to message i."""

    keys: tuple[InitialKey, ...]

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))
        if not self.keys:
            raise ValueError("key set must be nonempty")
        n = self.keys[0].n
        if any(k.n != n for k in self.keys):
            raise DimensionMismatch("keys have differing sizes")

    @property
    def n(self) -> int:
        return self.keys[0].n

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, i: int) -> InitialKey:
        return self.keys[i]


class KeysetValidation(NamedTuple):
    ok: bool
    duplicate_pairs: tuple[tuple[int, int], ...]  # 1-based key indices


class RoundSample(NamedTuple):
    """Accepted regenerating vector and matrix, plus rejected-draw count."""

    nu: RegenVector
    matrix: BitMatrix
    rejections: int


def keygen(n: int, rng: random.Random) -> InitialKey:
    """Draw a fresh key: uniform permutation, independent uniform mask bits."""
    if n < 1:
        raise ValueError("n must be positive")
    order = list(range(1, n + 1))
    rng.shuffle(order)
    mask = BitVector.from_int(rng.getrandbits(n), n)
    return InitialKey(Permutation(tuple(order)), mask)


def base_row(key: InitialKey) -> BitVector:
    """The regenerating-vector-free component of the key's coefficient row:
    bit j-1 is the mask bit selected by the permutation image of j."""
    mask = key.mask
    return BitVector(mask[p - 1] for p in key.perm.mapping)


def derive_row(key: InitialKey, nu: RegenVector) -> BitVector:
    """Decoding-coefficient row for one round: base row XOR regen vector."""
    if key.n != len(nu.bits):
        raise DimensionMismatch(
            f"key size {key.n} != regen vector length {len(nu.bits)}"
        )
    return base_row(key) ^ nu.bits


def assemble_matrix(keys: KeySet, nu: RegenVector) -> BitMatrix:
    """Stack the derived rows of all keys.  May be singular."""
    if keys.n != len(nu.bits):
        raise DimensionMismatch(
            f"key set size {keys.n} != regen vector length {len(nu.bits)}"
        )
    return BitMatrix.from_bitvectors([derive_row(k, nu) for k in keys.keys])


def validate_keyset(keys: KeySet) -> KeysetValidation:
    """Screen for key pairs with identical base rows.

    Such a pair makes every round matrix singular: XOR with a common
    regenerating vector preserves row equality.
    """
    rows = [base_row(k).value for k in keys.keys]
    dupes = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if rows[i] == rows[j]:
                dupes.append((i + 1, j + 1))
    return KeysetValidation(ok=not dupes, duplicate_pairs=tuple(dupes))


def keyset_coherent(keys: KeySet) -> bool:
    """Whether any regenerating vector yields an invertible round matrix.

    A subset of derived rows XORs to zero exactly when the same subset of
    base rows does (even size, the shared vector cancels) or when the vector
    equals the subset's XOR (odd size).  Appending a 1 to every base row
    folds both cases into one test: some vector works iff the augmented rows
    are linearly independent, and then exactly half of all vectors do.

    This is the exact feasibility condition; validate_keyset's duplicate-pair
    screen is only its simplest necessary consequence.
    """
    n = keys.n
    if len(keys) != n:
        return False
    rows = [base_row(k).value | (1 << n) for k in keys.keys]
    return gf2._reduce(rows, n + 1) == n


def sample_round_matrix(
    keys: KeySet,
    t: int,
    rng: random.Random,
    max_retries: int | None = None,
) -> RoundSample:
    """Draw regenerating vectors for round t until the assembled matrix is
    invertible.  Keys are never resampled; the vector is the only per-round
    freedom.  Raises KeySetIncoherent once max_retries draws were rejected.
    """
    n = keys.n
    if len(keys) != n:
        raise ValueError(f"need exactly {n} keys for a square matrix, got {len(keys)}")
    if max_retries is None:
        max_retries = 64 * n
    rejections = 0
    while True:
        nu = RegenVector(t, BitVector.from_int(rng.getrandbits(n), n))
        m = assemble_matrix(keys, nu)
        if gf2.rank(m) == n:
            return RoundSample(nu, m, rejections)
        rejections += 1
        if rejections > max_retries:
            raise KeySetIncoherent(
                f"no invertible matrix after {rejections} regen-vector draws"
            )


def keyset_to_dict(keys: KeySet) -> dict:
    return {
        "n": keys.n,
        "keys": [
            {"perm": list(k.perm.mapping), "mask": list(k.mask)}
            for k in keys.keys
        ],
    }


def keyset_from_dict(data: dict) -> KeySet:
    n = data["n"]
    keys = []
    for entry in data["keys"]:
        perm = Permutation(tuple(entry["perm"]))
        mask = BitVector(entry["mask"])
        if perm.n != n or len(mask) != n:
            raise DimensionMismatch("key entry size differs from declared n")
        keys.append(InitialKey(perm, mask))
    ks = KeySet(tuple(keys))
    if ks.n != n or len(ks) != n:
        raise DimensionMismatch("key count differs from declared n")
    return ks


def save_keyset(path: str | Path, keys: KeySet) -> None:
    Path(path).write_text(json.dumps(keyset_to_dict(keys), indent=2) + "\n")


def load_keyset(path: str | Path) -> KeySet:
    return keyset_from_dict(json.loads(Path(path).read_text()))
