"""Batched GF(2) kernels on numpy int64 bitsets.

The Monte Carlo auditor needs millions of random-matrix solves; doing them
one BitMatrix at a time is too slow.  Here a batch of square matrices is an
(count, n) int64 array, one packed row per entry, and Gauss-Jordan runs
vectorized across the whole batch.  Augmented columns ride in the high bits
of each row, so the same reduction serves rank tests, solves and inversion.

These kernels are differential-tested against the exact bitset routines in
`gf2`; they exist for throughput only and add no new semantics.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MAX_N",
    "random_rows",
    "random_key_matrices",
    "gauss_jordan",
    "invert_batch",
    "solve_batch",
    "pack_bits",
]

MAX_N = 31  # 2n augmented bits must fit in a non-negative int64


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"batched kernels support 1 <= n <= {MAX_N}, got {n}")


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (..., n) 0/1 array into packed ints, bit j = column j."""
    n = bits.shape[-1]
    weights = np.int64(1) << np.arange(n, dtype=np.int64)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def random_rows(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """(count, n) batch of uniform random square matrices."""
    _check_n(n)
    return rng.integers(0, np.int64(1) << n, size=(count, n), dtype=np.int64)


def random_key_matrices(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Batch of key-derived round matrices.

    Every row gets an independent uniform permutation and mask; the mask is
    gathered through the permutation to form the base row, and a per-matrix
    uniform regenerating vector is XORed into all rows.
    """
    _check_n(n)
    perms = rng.permuted(
        np.tile(np.arange(n), (count * n, 1)), axis=1
    )
    masks = rng.integers(0, 2, size=(count * n, n), dtype=np.int64)
    base = pack_bits(np.take_along_axis(masks, perms, axis=1)).reshape(count, n)
    nus = rng.integers(0, np.int64(1) << n, size=(count, 1), dtype=np.int64)
    return base ^ nus


def gauss_jordan(rows: np.ndarray, n: int) -> np.ndarray:
    """In-place Gauss-Jordan reduction of the low n columns of every matrix
    in the batch; high (augmented) bits follow the row operations.

    Pivots match the scalar routine: first row at or below the pivot
    position with a nonzero entry, in column order.  Returns a boolean mask
    of batch entries whose low-n block had full rank; rows of dead entries
    are left in an unspecified state.
    """
    count, m = rows.shape
    if m != n:
        raise ValueError("each batch entry must have exactly n rows")
    alive = np.ones(count, dtype=bool)
    idx = np.arange(count)
    for c in range(n):
        candidates = (rows[:, c:] >> c) & 1
        alive &= candidates.any(axis=1)
        p = c + candidates.argmax(axis=1)
        pivot_vals = rows[idx, p].copy()
        col_vals = rows[:, c].copy()
        rows[idx, p] = col_vals
        rows[:, c] = pivot_vals
        mask = (rows >> c) & 1
        mask[:, c] = 0
        rows ^= mask * rows[:, c : c + 1]
    return alive


def invert_batch(mats: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert every matrix in the batch.

    Returns (inverses, alive); rows of entries with alive[i] == False are
    meaningless.  Input is not modified.
    """
    if 2 * n > 62:
        raise ValueError("inversion needs 2n <= 62 augmented bits")
    aug = mats | (np.int64(1) << (n + np.arange(n, dtype=np.int64)))[None, :]
    alive = gauss_jordan(aug, n)
    return aug >> n, alive


def solve_batch(
    mats: np.ndarray, xs: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Solve A·P = x for every (A, x) pair in the batch.

    `xs` is a (count,) packed-int array.  Returns (ps, alive) where ps is a
    packed-int array of solutions; entries with alive[i] == False are
    meaningless.  Inputs are not modified.
    """
    _check_n(n)
    shifts = np.arange(n, dtype=np.int64)
    aug = mats | (((xs[:, None] >> shifts) & 1) << n)
    alive = gauss_jordan(aug, n)
    ps = pack_bits((aug >> n) & 1)
    return ps, alive
