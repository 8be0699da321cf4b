"""Keyed reverse-direction random linear network coding over GF(2).

A base station solves A(t)·P(t) = X(t) each round and broadcasts the coded
vector; clients rebuild exactly their own coefficient rows from fixed secret
keys plus a public per-round regenerating vector, so each recovers its own
messages and learns nothing meaningful about the rest.  The audit module
quantifies that claim by exact enumeration and Monte Carlo estimation.
"""

from .codec import (
    CodedSession,
    DemandProfile,
    MessageSet,
    decode_client,
    decode_element,
    encode_round,
    encode_session,
)
from .channel import ErasureChannel, Packet, broadcast, depacketize, packetize
from .gf2 import (
    BitMatrix,
    BitVector,
    invert,
    mat_vec_mul,
    random_matrix,
    random_nonsingular,
    rank,
    solve,
)
from .keying import (
    InitialKey,
    KeySet,
    Permutation,
    RegenVector,
    assemble_matrix,
    base_row,
    derive_row,
    keygen,
    sample_round_matrix,
    validate_keyset,
)
from .protocol import (
    ClientState,
    SessionConfig,
    SessionReport,
    nack,
    opportunistic_keyshare,
    recovery_loop,
    run_session,
)

__version__ = "0.1.0"
