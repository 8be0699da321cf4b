"""Packetization and a per-client independent broadcast erasure channel.

Each packet bundles one coded stream with the matching component of every
round's regenerating vector, so the vector needs no side channel; the price
is that a client must collect all n packets before it can decode anything.
Erasures hit whole packets: the packet is the acknowledgment unit.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Sequence

from .codec import CodedSession
from .errors import DimensionMismatch, Inconsistent, IncompleteSet
from .gf2 import BitVector
from .keying import RegenVector

__all__ = [
    "Packet",
    "ErasureChannel",
    "packetize",
    "depacketize",
    "broadcast",
    "packet_to_bytes",
    "packet_from_bytes",
    "bits_to_bytes",
    "bits_from_bytes",
]

_HEADER = struct.Struct(">QHI")  # session_id, stream index, T


@dataclass(frozen=True)
class Packet:
    """On-air unit: T coded bits and T regen-vector bits for one stream."""

    index: int  # 1-based stream index
    session_id: int
    coded_bits: BitVector
    nu_bits: BitVector

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("packet index is 1-based")
        if len(self.coded_bits) != len(self.nu_bits):
            raise DimensionMismatch("coded and regen payloads differ in length")

    @property
    def T(self) -> int:
        return len(self.coded_bits)


class ErasureChannel:
    """Broadcast channel erasing each packet independently per client.

    Draws are made in a canonical order (client-major, then packet-minor)
    from the channel's own seeded source, so reception sets are reproducible
    regardless of how the surrounding simulation is scheduled.
    """

    def __init__(self, erasure_probs: Sequence[float], rng: random.Random):
        probs = tuple(float(p) for p in erasure_probs)
        if not probs:
            raise ValueError("need at least one client")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        self.erasure_probs = probs
        self.rng = rng

    @property
    def k(self) -> int:
        return len(self.erasure_probs)

    def deliveries(self, item_count: int) -> list[set[int]]:
        """Per-client sets of delivered item slots (0-based) for one burst."""
        out = []
        for p in self.erasure_probs:
            got = set()
            for j in range(item_count):
                if self.rng.random() >= p:
                    got.add(j)
            out.append(got)
        return out


def packetize(coded: CodedSession, session_id: int = 0) -> list[Packet]:
    """One packet per stream; packet i also carries bit i of every round's
    regenerating vector.  Lossless: depacketize inverts it exactly."""
    n, T = coded.n, coded.T
    packets = []
    for i in range(1, n + 1):
        nu_bits = BitVector(coded.nus[t].bits[i - 1] for t in range(T))
        packets.append(
            Packet(
                index=i,
                session_id=session_id,
                coded_bits=coded.coded[i - 1],
                nu_bits=nu_bits,
            )
        )
    return packets


def depacketize(
    packets: Sequence[Packet], n: int | None = None
) -> tuple[tuple[BitVector, ...], tuple[RegenVector, ...]]:
    """Rebuild (coded streams, regen vectors) from a complete packet set."""
    if not packets:
        raise IncompleteSet(range(1, (n or 1) + 1))
    by_index = {}
    for p in packets:
        if p.index in by_index:
            raise Inconsistent(f"duplicate packet index {p.index}")
        by_index[p.index] = p
    if n is None:
        n = max(by_index)
    missing = sorted(set(range(1, n + 1)) - set(by_index))
    if missing or any(i > n for i in by_index):
        raise IncompleteSet(missing or [n])
    T = packets[0].T
    sid = packets[0].session_id
    if any(p.T != T for p in by_index.values()):
        raise Inconsistent("packets disagree on T")
    if any(p.session_id != sid for p in by_index.values()):
        raise Inconsistent("packets disagree on session id")

    coded = tuple(by_index[i].coded_bits for i in range(1, n + 1))
    nus = tuple(
        RegenVector(
            t + 1,
            BitVector(by_index[i].nu_bits[t] for i in range(1, n + 1)),
        )
        for t in range(T)
    )
    return coded, nus


def broadcast(packets: Sequence[Packet], ch: ErasureChannel) -> list[set[int]]:
    """Send every packet to every client; return per-client sets of received
    packet indices.  Erasures are independent across clients and packets."""
    slots = ch.deliveries(len(packets))
    return [{packets[j].index for j in got} for got in slots]


def bits_to_bytes(bits: BitVector) -> bytes:
    """Pack bits most-significant-bit-first, zero-padded to whole bytes."""
    out = bytearray((len(bits) + 7) // 8)
    for j in range(len(bits)):
        if bits[j]:
            out[j // 8] |= 1 << (7 - j % 8)
    return bytes(out)


def bits_from_bytes(data: bytes, length: int) -> BitVector:
    if len(data) != (length + 7) // 8:
        raise ValueError("byte payload does not match the declared bit length")
    return BitVector(
        (data[j // 8] >> (7 - j % 8)) & 1 for j in range(length)
    )


def packet_to_bytes(packet: Packet) -> bytes:
    """Serialize for trace files: 14-byte big-endian header, then the coded
    bits and the regen bits, each padded to whole bytes."""
    header = _HEADER.pack(packet.session_id, packet.index, packet.T)
    return header + bits_to_bytes(packet.coded_bits) + bits_to_bytes(packet.nu_bits)


def packet_from_bytes(data: bytes) -> Packet:
    if len(data) < _HEADER.size:
        raise ValueError("truncated packet header")
    session_id, index, T = _HEADER.unpack_from(data)
    nbytes = (T + 7) // 8
    if len(data) != _HEADER.size + 2 * nbytes:
        raise ValueError("packet payload length does not match header")
    coded = bits_from_bytes(data[_HEADER.size : _HEADER.size + nbytes], T)
    nu = bits_from_bytes(data[_HEADER.size + nbytes :], T)
    return Packet(index=index, session_id=session_id, coded_bits=coded, nu_bits=nu)
