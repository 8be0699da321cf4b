"""Bundled reference scenario: seven messages, four clients, a known key
table, a fixed regenerating vector, and the coefficient matrix they must
produce.  Used by the `demo-table1` subcommand and the acceptance suite as a
ground-truth reproduction check.

The stored key table carries a known erratum: the sixth map repeats index 2
and misses index 1, so it is not a valid permutation.  Applying the map
literally still reproduces the expected sixth matrix row (the positions that
differ select equal mask bits), so the row is printed for completeness but
excluded from the pass/fail verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import gf2
from .gf2 import BitMatrix, BitVector

__all__ = [
    "REFERENCE_MAPS",
    "REFERENCE_MASKS",
    "REFERENCE_REGEN_BITS",
    "EXPECTED_MATRIX_ROWS",
    "ERRATUM_ROW",
    "REFERENCE_DEMANDS",
    "REFERENCE_N",
    "REFERENCE_CLIENTS",
    "REFERENCE_ROUNDS",
    "RowCheck",
    "literal_row",
    "build_reference_matrix",
    "verify_reference",
]

REFERENCE_N = 7
REFERENCE_CLIENTS = 4
REFERENCE_ROUNDS = 64

# One map/mask pair per message.  Map 6 is the documented erratum.
REFERENCE_MAPS = (
    (2, 7, 6, 4, 1, 5, 3),
    (4, 3, 5, 1, 2, 6, 7),
    (5, 2, 4, 7, 3, 1, 6),
    (3, 1, 7, 6, 5, 4, 2),
    (2, 1, 6, 5, 7, 4, 3),
    (3, 2, 5, 6, 7, 2, 4),
    (1, 3, 7, 5, 4, 2, 6),
)

REFERENCE_MASKS = (
    (1, 1, 0, 1, 0, 0, 1),
    (1, 1, 1, 0, 0, 1, 0),
    (0, 1, 0, 0, 1, 0, 0),
    (1, 0, 1, 0, 1, 1, 1),
    (0, 1, 0, 1, 0, 1, 1),
    (1, 1, 0, 1, 0, 1, 0),
    (1, 0, 1, 0, 1, 0, 1),
)

REFERENCE_REGEN_BITS = (1, 0, 0, 0, 1, 0, 0)

EXPECTED_MATRIX_ROWS = (
    (0, 1, 0, 1, 0, 0, 0),
    (1, 1, 0, 1, 0, 1, 0),
    (0, 1, 0, 0, 1, 0, 0),
    (0, 1, 1, 1, 0, 0, 0),
    (0, 0, 1, 0, 0, 1, 0),
    (1, 1, 0, 1, 1, 1, 1),
    (0, 1, 1, 1, 1, 0, 0),
)

ERRATUM_ROW = 6  # 1-based; excluded from the verification verdict

REFERENCE_DEMANDS = (
    frozenset({2, 4, 7}),
    frozenset({1, 3, 6}),
    frozenset({1, 2, 3, 5, 6}),
    frozenset({2, 5, 6, 7}),
)


@dataclass(frozen=True)
class RowCheck:
    index: int  # 1-based
    derived: BitVector
    expected: BitVector
    erratum: bool

    @property
    def matches(self) -> bool:
        return self.derived == self.expected


def literal_row(map_: tuple[int, ...], mask: tuple[int, ...]) -> BitVector:
    """Base row from a raw index map, without requiring it to be a
    bijection.  Needed to reproduce the erratum row."""
    return BitVector(mask[p - 1] for p in map_)


def build_reference_matrix() -> BitMatrix:
    """Derive all seven coefficient rows from the stored table and the
    reference regenerating vector, erratum row included literally."""
    nu = BitVector(REFERENCE_REGEN_BITS)
    rows = [
        literal_row(m, k) ^ nu for m, k in zip(REFERENCE_MAPS, REFERENCE_MASKS)
    ]
    return BitMatrix.from_bitvectors(rows)


def verify_reference() -> tuple[bool, list[RowCheck], int]:
    """Check every derived row against the expected matrix.

    Returns (verdict, row checks, rank of the expected matrix).  The verdict
    covers the non-erratum rows only; the rank covers the whole matrix.
    """
    derived = build_reference_matrix()
    expected = BitMatrix(EXPECTED_MATRIX_ROWS)
    checks = [
        RowCheck(
            index=i + 1,
            derived=derived.row(i),
            expected=expected.row(i),
            erratum=(i + 1) == ERRATUM_ROW,
        )
        for i in range(REFERENCE_N)
    ]
    ok = all(c.matches for c in checks if not c.erratum)
    return ok, checks, gf2.rank(expected)
