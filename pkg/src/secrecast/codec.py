"""Base-station encoding and client-side decoding over whole sessions.

The coding runs in reverse: the station solves A·P = X each round so that a
client recovers message bit i as the inner product of its coefficient row
with the coded vector.  Decoding therefore never inverts a matrix.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import gf2, keying
from .errors import (
    DimensionMismatch,
    IncompleteReception,
    KeySetIncoherent,
    MissingKey,
)
from .gf2 import BitMatrix, BitVector
from .keying import InitialKey, KeySet, RegenVector

__all__ = [
    "MessageSet",
    "CodedSession",
    "DemandProfile",
    "encode_round",
    "encode_session",
    "decode_element",
    "decode_client",
    "round_vectors",
    "random_messages",
    "messages_to_dict",
    "messages_from_dict",
    "messages_from_raw",
    "load_messages",
]


@dataclass(frozen=True)
class MessageSet:
    """n message streams of T bits each; bit t-1 of stream i is round t."""

    streams: tuple[BitVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "streams", tuple(self.streams))
        if not self.streams:
            raise ValueError("need at least one stream")
        T = len(self.streams[0])
        if T < 1:
            raise ValueError("streams must be nonempty")
        if any(len(s) != T for s in self.streams):
            raise DimensionMismatch("streams have unequal lengths")

    @property
    def n(self) -> int:
        return len(self.streams)

    @property
    def T(self) -> int:
        return len(self.streams[0])


@dataclass(frozen=True)
class CodedSession:
    """Coded streams plus the per-round regenerating vectors that shaped them."""

    coded: tuple[BitVector, ...]
    nus: tuple[RegenVector, ...]
    singular_rejections: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coded", tuple(self.coded))
        object.__setattr__(self, "nus", tuple(self.nus))
        if len(self.nus) != self.T:
            raise DimensionMismatch("need one regen vector per round")
        if any(len(nu.bits) != self.n for nu in self.nus):
            raise DimensionMismatch("regen vector length differs from n")

    @property
    def n(self) -> int:
        return len(self.coded)

    @property
    def T(self) -> int:
        return len(self.coded[0])


@dataclass(frozen=True)
class DemandProfile:
    """A client id and the 1-based message indices it is privileged for."""

    client_id: int
    demand: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "demand", frozenset(self.demand))


def encode_round(X: BitVector, A: BitMatrix) -> BitVector:
    """Coded vector for one round: the unique P with A·P = X."""
    return gf2.solve(A, X)


def encode_session(
    msgs: MessageSet,
    keys: KeySet,
    rng: random.Random,
    nu_period: int = 1,
) -> CodedSession:
    """Encode all T rounds.

    A fresh regenerating vector is drawn at the start of each period of
    nu_period rounds (resampled until the assembled matrix is invertible) and
    reused within the period.  A period's matrix is inverted once and applied
    per round; the result is identical to solving each round directly because
    the solution of a nonsingular system is unique.
    """
    if nu_period < 1:
        raise ValueError("nu_period must be positive")
    if msgs.n != keys.n:
        raise DimensionMismatch(
            f"message count {msgs.n} != key count {keys.n}"
        )
    check = keying.validate_keyset(keys)
    if not check.ok:
        raise KeySetIncoherent(
            f"duplicate base rows for key pairs {list(check.duplicate_pairs)}"
        )
    if not keying.keyset_coherent(keys):
        raise KeySetIncoherent(
            "no regenerating vector can make this key set invertible"
        )

    n, T = msgs.n, msgs.T
    coded_ints = [0] * n
    nus: list[RegenVector] = []
    rejections = 0
    for start in range(0, T, nu_period):
        sample = keying.sample_round_matrix(keys, start + 1, rng)
        rejections += sample.rejections
        inv = gf2.invert(sample.matrix)
        for t in range(start, min(start + nu_period, T)):
            nus.append(RegenVector(t + 1, sample.nu.bits))
            x = BitVector.from_int(
                sum(((msgs.streams[i].value >> t) & 1) << i for i in range(n)), n
            )
            p = gf2.mat_vec_mul(inv, x)
            for i in range(n):
                coded_ints[i] |= ((p.value >> i) & 1) << t
    coded = tuple(BitVector.from_int(v, T) for v in coded_ints)
    return CodedSession(coded=coded, nus=tuple(nus), singular_rejections=rejections)


def decode_element(row: BitVector, P: BitVector) -> int:
    """One message bit: parity of the coded bits selected by the row."""
    if len(row) != len(P):
        raise DimensionMismatch(
            f"row length {len(row)} != coded vector length {len(P)}"
        )
    return (row.value & P.value).bit_count() & 1


def round_vectors(coded: Sequence[BitVector]) -> list[BitVector]:
    """Transpose coded streams into per-round coded vectors P(t)."""
    n = len(coded)
    T = len(coded[0])
    return [
        BitVector.from_int(
            sum(((coded[i].value >> t) & 1) << i for i in range(n)), n
        )
        for t in range(T)
    ]


def decode_client(
    profile: DemandProfile,
    keys_subset: Mapping[int, InitialKey],
    nus: Sequence[RegenVector],
    coded: Mapping[int, BitVector],
) -> dict[int, BitVector]:
    """Recover exactly the demanded streams from a complete coded set.

    `keys_subset` maps 1-based message index to key and must cover the
    demand; `coded` maps 1-based stream index to the T coded bits.  Nothing
    outside the demand is computed or returned.
    """
    if not profile.demand:
        return {}
    missing_keys = sorted(i for i in profile.demand if i not in keys_subset)
    if missing_keys:
        raise MissingKey(f"no key for demanded message(s) {missing_keys}")
    n = max(max(coded, default=0), max(profile.demand))
    absent = sorted(set(range(1, n + 1)) - set(coded))
    if absent:
        raise IncompleteReception(f"coded stream(s) {absent} not received")

    streams = [coded[i] for i in range(1, n + 1)]
    T = len(streams[0])
    if len(nus) != T:
        raise DimensionMismatch("need one regen vector per round")
    per_round = round_vectors(streams)

    out: dict[int, BitVector] = {}
    for i in sorted(profile.demand):
        key = keys_subset[i]
        bits = 0
        for t in range(T):
            row = keying.derive_row(key, nus[t])
            bits |= decode_element(row, per_round[t]) << t
        out[i] = BitVector.from_int(bits, T)
    return out


def random_messages(n: int, T: int, rng: random.Random) -> MessageSet:
    """Uniform random message streams (the model's source distribution)."""
    return MessageSet(tuple(BitVector.from_int(rng.getrandbits(T), T) for _ in range(n)))


def messages_to_dict(msgs: MessageSet) -> dict:
    return {
        "n": msgs.n,
        "T": msgs.T,
        "streams": [s.to01() for s in msgs.streams],
    }


def messages_from_dict(data: dict) -> MessageSet:
    streams = tuple(BitVector.from01(s) for s in data["streams"])
    msgs = MessageSet(streams)
    if msgs.n != data["n"] or msgs.T != data["T"]:
        raise DimensionMismatch("stream shapes differ from declared n/T")
    return msgs


def messages_from_raw(payload: bytes, n: int) -> MessageSet:
    """Split a raw byte payload into n equal streams.

    Bits are taken most-significant-bit-first; the first 8·len/n bits form
    stream 1, and so on.
    """
    total = 8 * len(payload)
    if n < 1 or total == 0 or total % n:
        raise ValueError(f"{total} payload bits do not split into {n} streams")
    T = total // n
    bits = [(payload[p // 8] >> (7 - p % 8)) & 1 for p in range(total)]
    return MessageSet(
        tuple(BitVector(bits[i * T : (i + 1) * T]) for i in range(n))
    )


def load_messages(path: str | Path, n: int | None = None) -> MessageSet:
    """Load messages from a .json stream file or a raw binary file."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return messages_from_dict(json.loads(path.read_text()))
    if n is None:
        raise ValueError("raw message files need an explicit stream count")
    return messages_from_raw(path.read_bytes(), n)
