"""Exact dense linear algebra over GF(2).

Vectors and matrix rows are packed into Python ints (bit j = element j), so
row operations are single XORs and inner products are a popcount.  All values
are immutable after construction; every operation is a pure function.
"""

from __future__ import annotations

import random
from typing import Iterable, Iterator, Sequence

from .errors import DimensionMismatch, Singular

__all__ = [
    "BitVector",
    "BitMatrix",
    "mat_vec_mul",
    "rank",
    "solve",
    "invert",
    "random_matrix",
    "random_nonsingular",
    "sample_nonsingular",
]


class BitVector:
    """An immutable GF(2) vector packed into a single int."""

    __slots__ = ("_n", "_v")

    def __init__(self, bits: Iterable[int]):
        bits = tuple(bits)
        value = 0
        for j, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"element {j} is {b!r}, expected 0 or 1")
            value |= b << j
        self._n = len(bits)
        self._v = value

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitVector":
        if length < 0 or value < 0 or value >> length:
            raise ValueError("value does not fit in the requested length")
        out = object.__new__(cls)
        out._n = length
        out._v = value
        return out

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls.from_int(0, length)

    @classmethod
    def unit(cls, length: int, index: int) -> "BitVector":
        """Standard basis vector with a single 1 at `index` (0-based)."""
        if not 0 <= index < length:
            raise ValueError("unit index out of range")
        return cls.from_int(1 << index, length)

    @classmethod
    def from01(cls, text: str) -> "BitVector":
        """Parse a string of '0'/'1' characters, leftmost char = element 0."""
        return cls(int(c) for c in text)

    @property
    def value(self) -> int:
        return self._v

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self._n:
            raise IndexError("bit index out of range")
        return (self._v >> j) & 1

    def __iter__(self) -> Iterator[int]:
        v = self._v
        for _ in range(self._n):
            yield v & 1
            v >>= 1

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self._n != other._n:
            raise DimensionMismatch(
                f"cannot XOR vectors of length {self._n} and {other._n}"
            )
        return BitVector.from_int(self._v ^ other._v, self._n)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._n == other._n and self._v == other._v

    def __hash__(self) -> int:
        return hash((self._n, self._v))

    def weight(self) -> int:
        return self._v.bit_count()

    def to01(self) -> str:
        return "".join(str((self._v >> j) & 1) for j in range(self._n))

    def __repr__(self) -> str:
        return f"BitVector({list(self)})"


class BitMatrix:
    """An immutable GF(2) matrix stored as one packed int per row."""

    __slots__ = ("_rows", "_cols", "_data")

    def __init__(self, rows: Iterable[Iterable[int]]):
        vectors = [BitVector(r) for r in rows]
        if not vectors:
            raise ValueError("matrix needs at least one row")
        cols = len(vectors[0])
        if any(len(v) != cols for v in vectors):
            raise ValueError("rows have unequal lengths")
        if cols == 0:
            raise ValueError("matrix needs at least one column")
        self._rows = len(vectors)
        self._cols = cols
        self._data = tuple(v.value for v in vectors)

    @classmethod
    def from_row_ints(cls, data: Sequence[int], cols: int) -> "BitMatrix":
        if not data or cols <= 0:
            raise ValueError("matrix needs positive dimensions")
        if any(r < 0 or r >> cols for r in data):
            raise ValueError("row value does not fit in the column count")
        out = object.__new__(cls)
        out._rows = len(data)
        out._cols = cols
        out._data = tuple(data)
        return out

    @classmethod
    def from_bitvectors(cls, rows: Sequence[BitVector]) -> "BitMatrix":
        if not rows:
            raise ValueError("matrix needs at least one row")
        cols = len(rows[0])
        if any(len(r) != cols for r in rows):
            raise DimensionMismatch("rows have unequal lengths")
        return cls.from_row_ints([r.value for r in rows], cols)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_row_ints([1 << i for i in range(n)], n)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls.from_row_ints([0] * rows, cols)

    @property
    def rows(self) -> int:
        return self._rows

    @property
    def cols(self) -> int:
        return self._cols

    @property
    def row_ints(self) -> tuple:
        return self._data

    def row(self, r: int) -> BitVector:
        return BitVector.from_int(self._data[r], self._cols)

    def __getitem__(self, r: int) -> BitVector:
        return self.row(r)

    def entry(self, r: int, c: int) -> int:
        if not (0 <= r < self._rows and 0 <= c < self._cols):
            raise IndexError("matrix index out of range")
        return (self._data[r] >> c) & 1

    def transpose(self) -> "BitMatrix":
        cols = []
        for c in range(self._cols):
            v = 0
            for r in range(self._rows):
                v |= ((self._data[r] >> c) & 1) << r
            cols.append(v)
        return BitMatrix.from_row_ints(cols, self._rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self._cols == other._cols and self._data == other._data

    def __hash__(self) -> int:
        return hash((self._cols, self._data))

    def to_text(self) -> str:
        """Rows of space-separated 0/1 characters, for debug and golden files."""
        return "\n".join(
            " ".join(str((r >> c) & 1) for c in range(self._cols))
            for r in self._data
        )

    def __repr__(self) -> str:
        return f"BitMatrix({self._rows}x{self._cols})"


def _reduce(rows: list[int], cols: int) -> int:
    """In-place Gauss-Jordan reduction; pivots are the first nonzero entry in
    column order, rows are swapped into place.  Returns the rank."""
    pivot_row = 0
    for c in range(cols):
        found = -1
        for r in range(pivot_row, len(rows)):
            if (rows[r] >> c) & 1:
                found = r
                break
        if found < 0:
            continue
        rows[pivot_row], rows[found] = rows[found], rows[pivot_row]
        piv = rows[pivot_row]
        for r in range(len(rows)):
            if r != pivot_row and (rows[r] >> c) & 1:
                rows[r] ^= piv
        pivot_row += 1
        if pivot_row == len(rows):
            break
    return pivot_row


def mat_vec_mul(A: BitMatrix, v: BitVector) -> BitVector:
    """Matrix-vector product over GF(2): result bit r is the parity of the
    AND of row r with v."""
    if A.cols != len(v):
        raise DimensionMismatch(
            f"matrix has {A.cols} columns, vector has length {len(v)}"
        )
    out = 0
    vv = v.value
    for r, row in enumerate(A.row_ints):
        out |= ((row & vv).bit_count() & 1) << r
    return BitVector.from_int(out, A.rows)


def rank(A: BitMatrix) -> int:
    """Dimension of the row space.  Accepts rectangular matrices."""
    work = list(A.row_ints)
    return _reduce(work, A.cols)


def solve(A: BitMatrix, x: BitVector) -> BitVector:
    """Solve A·P = x for P.  A must be square and nonsingular."""
    if A.rows != A.cols:
        raise DimensionMismatch("solve requires a square matrix")
    if A.rows != len(x):
        raise DimensionMismatch(
            f"matrix has {A.rows} rows, right-hand side has length {len(x)}"
        )
    n = A.rows
    work = [row | (((x.value >> r) & 1) << n) for r, row in enumerate(A.row_ints)]
    if _reduce(work, n) < n:
        raise Singular("coefficient matrix is singular")
    # Full-rank Jordan reduction leaves the identity in the low n columns,
    # so row r of the augmented column is solution bit r.
    out = 0
    for r in range(n):
        out |= ((work[r] >> n) & 1) << r
    return BitVector.from_int(out, n)


def invert(A: BitMatrix) -> BitMatrix:
    """Inverse of a nonsingular square matrix."""
    if A.rows != A.cols:
        raise DimensionMismatch("invert requires a square matrix")
    n = A.rows
    work = [row | (1 << (n + r)) for r, row in enumerate(A.row_ints)]
    if _reduce(work, n) < n:
        raise Singular("matrix is singular")
    return BitMatrix.from_row_ints([row >> n for row in work], n)


def random_matrix(n: int, rng: random.Random) -> BitMatrix:
    """Square matrix with independent uniform entries."""
    if n < 1:
        raise ValueError("n must be positive")
    return BitMatrix.from_row_ints([rng.getrandbits(n) for _ in range(n)], n)


def sample_nonsingular(n: int, rng: random.Random) -> tuple[BitMatrix, int]:
    """Rejection-sample a uniform invertible matrix.

    Returns (matrix, rejected_draws).  A uniform binary matrix is invertible
    with probability > 0.288 for every n, so the loop terminates quickly.
    """
    rejections = 0
    while True:
        m = random_matrix(n, rng)
        if rank(m) == n:
            return m, rejections
        rejections += 1


def random_nonsingular(n: int, rng: random.Random) -> BitMatrix:
    """Uniform draw from the invertible n-by-n matrices."""
    return sample_nonsingular(n, rng)[0]
