"""Executable secrecy checks: leakage, coefficient, and packet distributions.

Everything here measures; nothing proves.  Small sizes are settled by exact
enumeration with integer tallies (independence then shows up as a hard zero,
uniformity as exact rational equality), larger sizes by Monte Carlo plug-in
estimates over the batched kernels, with sample counts reported so callers
can judge the error themselves.

Two matrix sources are audited: `idealized_uniform_nonsingular` draws the
coefficient matrix uniformly from the invertible matrices, and `key_derived`
builds it from random keys plus a random regenerating vector conditioned on
invertibility.  Enumeration shows the two laws coincide.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import gf2, gf2batch
from .errors import DimensionMismatch, DomainError, InfeasibleEnumeration
from .gf2 import BitMatrix, BitVector

__all__ = [
    "IDEALIZED",
    "KEY_DERIVED",
    "EXACT_N_MAX",
    "EXACT_N_MAX_KEY_DERIVED",
    "LeakageReport",
    "CoefficientDistReport",
    "PacketDistReport",
    "gallager_prob",
    "coefficient_distribution",
    "packet_distribution",
    "leakage",
    "matrix_law_distance",
    "binary_entropy",
]

IDEALIZED = "idealized_uniform_nonsingular"
KEY_DERIVED = "key_derived"

EXACT_N_MAX = 4
EXACT_N_MAX_KEY_DERIVED = 3

_CHUNK = 1 << 15


@dataclass(frozen=True)
class LeakageReport:
    """Measured information flow from the coded vector to one message bit."""

    n: int
    target: int
    known: tuple[int, ...]
    mutual_information_bits: float
    conditional_mi_given_nonzero_P_bits: float
    packet_marginal_bias: float
    method: str
    sample_count: int
    matrix_source: str = IDEALIZED

    def to_json_dict(self) -> dict:
        return {
            "kind": "leakage",
            "n": self.n,
            "target": self.target,
            "known": list(self.known),
            "matrix_source": self.matrix_source,
            "method": self.method,
            "sample_count": self.sample_count,
            "mutual_information_bits": self.mutual_information_bits,
            "conditional_mi_given_nonzero_P_bits": (
                self.conditional_mi_given_nonzero_P_bits
            ),
            "packet_marginal_bias": self.packet_marginal_bias,
        }


@dataclass(frozen=True)
class CoefficientDistReport:
    """Distribution of the last-row entries of the inverse of a uniform
    nonsingular matrix, against the closed form 2^(n-1)/(2^n - 1).

    `elimination_conditioned` is the same tally computed along an independent
    route: forward elimination with transform tracking, conditioned on the
    elimination isolating the last unknown.  Under first-nonzero-pivot
    elimination that condition is equivalent to invertibility, so the two
    columns agree; both are reported because the conditioning reading is
    ambiguous in principle.
    """

    n: int
    method: str
    sample_count: int
    prob_one: tuple
    closed_form: Fraction
    elimination_conditioned: tuple | None = None
    rejections: int = 0

    def to_json_dict(self) -> dict:
        exact = self.method == "exact"
        return {
            "kind": "coefficient_distribution",
            "n": self.n,
            "method": self.method,
            "sample_count": self.sample_count,
            "rejections": self.rejections,
            "prob_one": [float(p) for p in self.prob_one],
            "prob_one_exact": [str(p) for p in self.prob_one] if exact else None,
            "closed_form": float(self.closed_form),
            "closed_form_exact": str(self.closed_form),
            "elimination_conditioned": (
                None
                if self.elimination_conditioned is None
                else [float(p) for p in self.elimination_conditioned]
            ),
        }


@dataclass(frozen=True)
class PacketDistReport:
    """Distribution of the coded vector P over a random round."""

    n: int
    method: str
    sample_count: int
    probabilities: tuple
    max_marginal_bias: float

    @property
    def uniform_exact(self) -> bool:
        target = Fraction(1, 1 << self.n)
        return all(p == target for p in self.probabilities)

    def to_json_dict(self) -> dict:
        exact = self.method == "exact"
        return {
            "kind": "packet_distribution",
            "n": self.n,
            "method": self.method,
            "sample_count": self.sample_count,
            "probabilities": [float(p) for p in self.probabilities],
            "probabilities_exact": (
                [str(p) for p in self.probabilities] if exact else None
            ),
            "max_marginal_bias": self.max_marginal_bias,
            "uniform_exact": exact and self.uniform_exact,
        }


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("entropy argument must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def gallager_prob(deltas: Sequence[float], m: BitVector) -> float:
    """Probability that the XOR of the included bits equals 1.

    For independent bits with Prob(bit_i = 1) = deltas[i], the combination
    s = XOR over {i : m_i = 1} has Prob(s = 1) = (1 - prod(1 - 2*delta_i))/2,
    the product running over the included indices only; an empty selection
    gives exactly 0.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) != len(m):
        raise DimensionMismatch(
            f"{len(deltas)} probabilities for a selector of length {len(m)}"
        )
    if any(not 0.0 <= d <= 1.0 for d in deltas):
        raise DomainError("bit probabilities must lie in [0, 1]")
    prod = 1.0
    for d, bit in zip(deltas, m):
        if bit:
            prod *= 1.0 - 2.0 * d
    return (1.0 - prod) / 2.0


# ---------------------------------------------------------------------------
# exact enumeration


def _rows_rank(rows: Iterable[int], n: int) -> int:
    work = list(rows)
    return gf2._reduce(work, n)


def _matvec_int(rows: Sequence[int], v: int) -> int:
    out = 0
    for i, r in enumerate(rows):
        out |= ((r & v).bit_count() & 1) << i
    return out


@lru_cache(maxsize=None)
def _invertibles(n: int) -> tuple[tuple[int, ...], ...]:
    """All invertible n-by-n matrices as row-int tuples."""
    return tuple(
        rows
        for rows in itertools.product(range(1 << n), repeat=n)
        if _rows_rank(rows, n) == n
    )


@lru_cache(maxsize=None)
def _joint_counts_idealized(n: int) -> tuple[tuple[int, ...], ...]:
    """counts[x][p] over every invertible A and every message vector x,
    where p solves A.p = x."""
    counts = [[0] * (1 << n) for _ in range(1 << n)]
    for rows in _invertibles(n):
        inv = gf2.invert(BitMatrix.from_row_ints(rows, n)).row_ints
        for x in range(1 << n):
            counts[x][_matvec_int(inv, x)] += 1
    return tuple(tuple(row) for row in counts)


@lru_cache(maxsize=None)
def _base_row_multiplicities(n: int) -> tuple[int, ...]:
    """How many (permutation, mask) pairs produce each base-row value."""
    counts = [0] * (1 << n)
    for perm in itertools.permutations(range(1, n + 1)):
        for mask in range(1 << n):
            row = 0
            for j, p in enumerate(perm):
                row |= ((mask >> (p - 1)) & 1) << j
            counts[row] += 1
    return tuple(counts)


@lru_cache(maxsize=None)
def _key_derived_matrix_weights(n: int) -> dict:
    """Weight of every matrix under the key-derived law, before conditioning.

    Rows are independent given the regenerating vector, so the enumeration
    runs over base-row value combinations weighted by their (permutation,
    mask) multiplicities instead of over raw key tuples.
    """
    mult = _base_row_multiplicities(n)
    weights: dict = {}
    for combo in itertools.product(range(1 << n), repeat=n):
        w = 1
        for v in combo:
            w *= mult[v]
        if not w:
            continue
        for nu in range(1 << n):
            rows = tuple(v ^ nu for v in combo)
            weights[rows] = weights.get(rows, 0) + w
    return weights


@lru_cache(maxsize=None)
def _joint_counts_key_derived(n: int) -> tuple[tuple[tuple[int, ...], ...], int]:
    """Weighted counts[x][p] under the nonsingular-conditioned key-derived
    law, plus the total tallied mass (configurations times message vectors).
    """
    counts = [[0] * (1 << n) for _ in range(1 << n)]
    total = 0
    for rows, w in _key_derived_matrix_weights(n).items():
        if _rows_rank(rows, n) != n:
            continue
        inv = gf2.invert(BitMatrix.from_row_ints(rows, n)).row_ints
        for x in range(1 << n):
            counts[x][_matvec_int(inv, x)] += w
            total += w
    return tuple(tuple(row) for row in counts), total


def _elimination_last_row(rows: Sequence[int], n: int) -> int | None:
    """Forward-eliminate with transform tracking; if the echelon's last row
    isolates the last unknown, return the transform row expressing it in
    terms of the right-hand side, else None."""
    work = [r | (1 << (n + i)) for i, r in enumerate(rows)]
    low = (1 << n) - 1
    pivot_row = 0
    for c in range(n):
        found = -1
        for r in range(pivot_row, n):
            if (work[r] >> c) & 1:
                found = r
                break
        if found < 0:
            continue
        work[pivot_row], work[found] = work[found], work[pivot_row]
        for r in range(pivot_row + 1, n):
            if (work[r] >> c) & 1:
                work[r] ^= work[pivot_row]
        pivot_row += 1
    if work[n - 1] & low == 1 << (n - 1):
        return work[n - 1] >> n
    return None


# ---------------------------------------------------------------------------
# information measures on integer tallies


def _mi_bits(cells: dict) -> float:
    """Plug-in mutual information in bits of a joint tally {(a, b): count}.

    The factorization test runs in exact integer arithmetic, so a joint that
    is truly independent yields a hard 0.0 rather than rounding noise.
    """
    total = sum(cells.values())
    if total == 0:
        return 0.0
    row: dict = {}
    col: dict = {}
    for (a, b), c in cells.items():
        row[a] = row.get(a, 0) + c
        col[b] = col.get(b, 0) + c
    for a, ra in row.items():
        for b, cb in col.items():
            if cells.get((a, b), 0) * total != ra * cb:
                break
        else:
            continue
        break
    else:
        return 0.0
    acc = 0.0
    for (a, b), c in cells.items():
        if c:
            acc += (c / total) * math.log2(c * total / (row[a] * col[b]))
    return max(acc, 0.0)


def _conditional_mi_bits(triples: dict) -> float:
    """I(a; b | g) in bits from a tally keyed by (g, a, b)."""
    total = sum(triples.values())
    if total == 0:
        return 0.0
    groups: dict = {}
    for (g, a, b), c in triples.items():
        groups.setdefault(g, {})[(a, b)] = c
    acc = 0.0
    for cells in groups.values():
        sub = _mi_bits(cells)
        if sub:
            acc += (sum(cells.values()) / total) * sub
    return acc


def _leakage_stats(triples: dict, n: int) -> tuple[float, float, float]:
    """(MI, MI given P != 0, max packet-bit marginal bias) from a tally
    keyed by (known-value, target-bit, packet-value)."""
    total = sum(triples.values())
    mi = _conditional_mi_bits(triples)
    nonzero = {key: c for key, c in triples.items() if key[2] != 0}
    cond = _conditional_mi_bits(nonzero)
    ones = [0] * n
    for (_, _, p), c in triples.items():
        for j in range(n):
            if (p >> j) & 1:
                ones[j] += c
    bias = max(
        (abs(Fraction(o, total) - Fraction(1, 2)) for o in ones),
        default=Fraction(0),
    )
    return mi, cond, float(bias)


def _aggregate_triples(
    counts: Sequence[Sequence[int]], n: int, target: int, known: tuple[int, ...]
) -> dict:
    ti = target - 1
    gidx = [g - 1 for g in known]
    triples: dict = {}
    for x in range(1 << n):
        xi = (x >> ti) & 1
        g = 0
        for j, gj in enumerate(gidx):
            g |= ((x >> gj) & 1) << j
        row = counts[x]
        for p in range(1 << n):
            c = row[p]
            if c:
                key = (g, xi, p)
                triples[key] = triples.get(key, 0) + c
    return triples


# ---------------------------------------------------------------------------
# Monte Carlo sampling


def _require_mc_args(trials, rng):
    if trials is None or trials < 1:
        raise ValueError("monte_carlo mode needs a positive trials count")
    if rng is None:
        raise ValueError("monte_carlo mode needs a numpy Generator")


def _sample_xp(
    rng: np.random.Generator, n: int, trials: int, matrix_source: str
) -> tuple[np.ndarray, np.ndarray, int]:
    """Sample `trials` accepted (x, p) pairs; rejected singular draws are
    counted.  Work proceeds in fixed-size chunks with spawned child
    generators, so results do not depend on how chunks are scheduled."""
    xs_parts, ps_parts = [], []
    rejections = 0
    have = 0
    while have < trials:
        child = rng.spawn(1)[0]
        if matrix_source == KEY_DERIVED:
            mats = gf2batch.random_key_matrices(child, _CHUNK, n)
        else:
            mats = gf2batch.random_rows(child, _CHUNK, n)
        xs = child.integers(0, np.int64(1) << n, size=_CHUNK, dtype=np.int64)
        ps, alive = gf2batch.solve_batch(mats, xs, n)
        rejections += int(np.count_nonzero(~alive))
        xs_parts.append(xs[alive])
        ps_parts.append(ps[alive])
        have += int(np.count_nonzero(alive))
    return (
        np.concatenate(xs_parts)[:trials],
        np.concatenate(ps_parts)[:trials],
        rejections,
    )


def _sample_inverse_last_rows(
    rng: np.random.Generator, n: int, trials: int
) -> tuple[np.ndarray, int]:
    rows_parts = []
    rejections = 0
    have = 0
    while have < trials:
        child = rng.spawn(1)[0]
        mats = gf2batch.random_rows(child, _CHUNK, n)
        inv, alive = gf2batch.invert_batch(mats, n)
        rejections += int(np.count_nonzero(~alive))
        rows_parts.append(inv[alive, n - 1])
        have += int(np.count_nonzero(alive))
    return np.concatenate(rows_parts)[:trials], rejections


# ---------------------------------------------------------------------------
# public operations


def coefficient_distribution(
    n: int,
    mode: str = "exact",
    trials: int | None = None,
    rng: np.random.Generator | None = None,
) -> CoefficientDistReport:
    """Per-coordinate probability that an entry of the last row of the
    inverse of a uniform nonsingular matrix equals 1."""
    closed = Fraction(1 << (n - 1), (1 << n) - 1)
    if mode == "exact":
        if n > EXACT_N_MAX:
            raise InfeasibleEnumeration(
                f"exact enumeration supports n <= {EXACT_N_MAX}, got {n}"
            )
        gl = _invertibles(n)
        counts = [0] * n
        for rows in gl:
            last = gf2.invert(BitMatrix.from_row_ints(rows, n)).row_ints[n - 1]
            for j in range(n):
                counts[j] += (last >> j) & 1
        elim_counts = [0] * n
        elim_total = 0
        for rows in itertools.product(range(1 << n), repeat=n):
            gamma = _elimination_last_row(rows, n)
            if gamma is None:
                continue
            elim_total += 1
            for j in range(n):
                elim_counts[j] += (gamma >> j) & 1
        return CoefficientDistReport(
            n=n,
            method="exact",
            sample_count=len(gl),
            prob_one=tuple(Fraction(c, len(gl)) for c in counts),
            closed_form=closed,
            elimination_conditioned=tuple(
                Fraction(c, elim_total) for c in elim_counts
            ),
        )
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    _require_mc_args(trials, rng)
    rows, rejections = _sample_inverse_last_rows(rng, n, trials)
    probs = tuple(
        float(np.count_nonzero((rows >> j) & 1)) / trials for j in range(n)
    )
    return CoefficientDistReport(
        n=n,
        method="monte_carlo",
        sample_count=trials,
        prob_one=probs,
        closed_form=closed,
        rejections=rejections,
    )


def packet_distribution(
    n: int,
    mode: str = "exact",
    trials: int | None = None,
    rng: np.random.Generator | None = None,
) -> PacketDistReport:
    """Joint distribution of the coded vector P over a uniform nonsingular
    matrix and uniform messages.  Exactly uniform in exact mode."""
    if mode == "exact":
        if n > EXACT_N_MAX:
            raise InfeasibleEnumeration(
                f"exact enumeration supports n <= {EXACT_N_MAX}, got {n}"
            )
        joint = _joint_counts_idealized(n)
        size = 1 << n
        pcounts = [0] * size
        for x in range(size):
            for p in range(size):
                pcounts[p] += joint[x][p]
        total = sum(pcounts)
        probs = tuple(Fraction(c, total) for c in pcounts)
        ones = [
            sum(pcounts[p] for p in range(size) if (p >> j) & 1) for j in range(n)
        ]
        bias = max(abs(Fraction(o, total) - Fraction(1, 2)) for o in ones)
        return PacketDistReport(
            n=n,
            method="exact",
            sample_count=total,
            probabilities=probs,
            max_marginal_bias=float(bias),
        )
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    _require_mc_args(trials, rng)
    if n > 24:
        raise InfeasibleEnumeration("per-vector tallies support n <= 24")
    _, ps, _ = _sample_xp(rng, n, trials, IDEALIZED)
    pcounts = np.bincount(ps, minlength=1 << n)
    probs = tuple(float(c) / trials for c in pcounts)
    ones = [
        int(np.count_nonzero((ps >> j) & 1)) for j in range(n)
    ]
    bias = max(abs(o / trials - 0.5) for o in ones)
    return PacketDistReport(
        n=n,
        method="monte_carlo",
        sample_count=trials,
        probabilities=probs,
        max_marginal_bias=float(bias),
    )


def leakage(
    n: int,
    target: int,
    known: Iterable[int] = (),
    mode: str = "exact",
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    matrix_source: str = IDEALIZED,
) -> LeakageReport:
    """Mutual information between one message bit and the coded vector,
    given a set of already-known messages.

    `target` and `known` are 1-based message indices.  The report carries
    both the unconditional value and the value conditioned on P != 0; exact
    enumeration shows the whole leakage sits on the P = 0 atom.
    """
    known = tuple(sorted(set(known)))
    if not 1 <= target <= n:
        raise DomainError(f"target {target} outside 1..{n}")
    if any(not 1 <= g <= n for g in known):
        raise DomainError(f"known indices {list(known)} outside 1..{n}")
    if target in known:
        raise DomainError(f"target {target} is already known")
    if matrix_source not in (IDEALIZED, KEY_DERIVED):
        raise ValueError(f"unknown matrix source {matrix_source!r}")

    if mode == "exact":
        bound = EXACT_N_MAX if matrix_source == IDEALIZED else EXACT_N_MAX_KEY_DERIVED
        if n > bound:
            raise InfeasibleEnumeration(
                f"exact {matrix_source} enumeration supports n <= {bound}, got {n}"
            )
        if matrix_source == IDEALIZED:
            counts = _joint_counts_idealized(n)
            sample_count = len(_invertibles(n)) * (1 << n)
        else:
            counts, sample_count = _joint_counts_key_derived(n)
        triples = _aggregate_triples(counts, n, target, known)
        mi, cond, bias = _leakage_stats(triples, n)
        return LeakageReport(
            n=n,
            target=target,
            known=known,
            mutual_information_bits=mi,
            conditional_mi_given_nonzero_P_bits=cond,
            packet_marginal_bias=bias,
            method="exact",
            sample_count=sample_count,
            matrix_source=matrix_source,
        )
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    _require_mc_args(trials, rng)
    xs, ps, _ = _sample_xp(rng, n, trials, matrix_source)
    ti = target - 1
    xi = (xs >> ti) & 1
    g = np.zeros_like(xs)
    for j, gj in enumerate(known):
        g |= ((xs >> (gj - 1)) & 1) << j
    width_g = len(known)
    code = (ps << (1 + width_g)) | (g << 1) | xi
    values, cnts = np.unique(code, return_counts=True)
    triples = {}
    for v, c in zip(values.tolist(), cnts.tolist()):
        triples[((v >> 1) & ((1 << width_g) - 1), v & 1, v >> (1 + width_g))] = c
    mi, cond, bias = _leakage_stats(triples, n)
    return LeakageReport(
        n=n,
        target=target,
        known=known,
        mutual_information_bits=mi,
        conditional_mi_given_nonzero_P_bits=cond,
        packet_marginal_bias=bias,
        method="monte_carlo",
        sample_count=trials,
        matrix_source=matrix_source,
    )


def matrix_law_distance(n: int) -> Fraction:
    """Total variation distance between the nonsingular-conditioned
    key-derived matrix law and the uniform law on invertible matrices."""
    if n > EXACT_N_MAX_KEY_DERIVED:
        raise InfeasibleEnumeration(
            f"exact enumeration supports n <= {EXACT_N_MAX_KEY_DERIVED}, got {n}"
        )
    weights = _key_derived_matrix_weights(n)
    gl = _invertibles(n)
    nonsingular_mass = sum(
        w for rows, w in weights.items() if _rows_rank(rows, n) == n
    )
    uniform = Fraction(1, len(gl))
    acc = Fraction(0)
    for rows in gl:
        acc += abs(Fraction(weights.get(rows, 0), nonsingular_mass) - uniform)
    return acc / 2
