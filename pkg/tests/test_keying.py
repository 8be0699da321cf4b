import itertools
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    CORRECTED_MAP_6,
    RiggedRandom,
    brute_force_rank,
    reference_keyset,
    reference_valid_keys,
)
from secrecast import demo, gf2
from secrecast.errors import DimensionMismatch, KeySetIncoherent
from secrecast.gf2 import BitMatrix, BitVector
from secrecast.keying import (
    InitialKey,
    KeySet,
    Permutation,
    RegenVector,
    assemble_matrix,
    base_row,
    derive_row,
    keygen,
    keyset_coherent,
    keyset_from_dict,
    keyset_to_dict,
    load_keyset,
    sample_round_matrix,
    save_keyset,
    validate_keyset,
)

NU24 = RegenVector(24, BitVector(demo.REFERENCE_REGEN_BITS))


def key(mapping, mask):
    return InitialKey(Permutation(mapping), BitVector(mask))


def identity_base_keys(n):
    """Keys whose base rows form the identity matrix."""
    ident = tuple(range(1, n + 1))
    return KeySet(
        tuple(
            InitialKey(Permutation(ident), BitVector.unit(n, i))
            for i in range(n)
        )
    )


# ---------------------------------------------------------------------------
# Permutation / type invariants


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((3, 2, 5, 6, 7, 2, 4))  # the stored erratum map


def test_permutation_rejects_out_of_range():
    with pytest.raises(ValueError):
        Permutation((0, 1, 2))


def test_initial_key_requires_matching_sizes():
    with pytest.raises(DimensionMismatch):
        InitialKey(Permutation((1, 2)), BitVector([1, 0, 0]))


def test_keyset_requires_uniform_size():
    with pytest.raises(DimensionMismatch):
        KeySet((key((1, 2), [1, 0]), key((1, 2, 3), [1, 0, 0])))


# ---------------------------------------------------------------------------
# base_row / derive_row against the reference table


def test_base_row_reference_key_1():
    k1 = key((2, 7, 6, 4, 1, 5, 3), (1, 1, 0, 1, 0, 0, 1))
    assert base_row(k1) == BitVector([1, 1, 0, 1, 1, 0, 0])
    assert derive_row(k1, NU24) == BitVector([0, 1, 0, 1, 0, 0, 0])


def test_base_row_reference_key_4():
    k4 = key((3, 1, 7, 6, 5, 4, 2), (1, 0, 1, 0, 1, 1, 1))
    assert base_row(k4) == BitVector([1, 1, 1, 1, 1, 0, 0])
    assert derive_row(k4, NU24) == BitVector([0, 1, 1, 1, 0, 0, 0])


def test_derive_row_reference_key_5():
    k5 = key((2, 1, 6, 5, 7, 4, 3), (0, 1, 0, 1, 0, 1, 1))
    assert derive_row(k5, NU24) == BitVector([0, 0, 1, 0, 0, 1, 0])


def test_base_row_identity_permutation_returns_mask():
    mask = BitVector([1, 0, 0, 1, 1])
    k = InitialKey(Permutation((1, 2, 3, 4, 5)), mask)
    assert base_row(k) == mask


def test_derive_row_zero_vector_is_base_row(rng):
    k = keygen(6, rng)
    nu0 = RegenVector(1, BitVector.zeros(6))
    assert derive_row(k, nu0) == base_row(k)


def test_derive_row_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        derive_row(keygen(3, rng), RegenVector(1, BitVector.zeros(4)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 32))
@settings(max_examples=80)
def test_derive_row_xor_reconstructs_base_row(seed, n):
    rng = random.Random(seed)
    k = keygen(n, rng)
    nu = RegenVector(1, BitVector.from_int(rng.getrandbits(n), n))
    assert derive_row(k, nu) ^ nu.bits == base_row(k)


# ---------------------------------------------------------------------------
# assemble_matrix


def test_assemble_reference_matrix_matches_printed_rows():
    m = assemble_matrix(reference_keyset(), NU24)
    expected = BitMatrix(demo.EXPECTED_MATRIX_ROWS)
    for i in range(7):
        if i + 1 == demo.ERRATUM_ROW:
            continue
        assert m.row(i) == expected.row(i)
    # the corrected map happens to reproduce the printed erratum row as well
    assert m.row(demo.ERRATUM_ROW - 1) == expected.row(demo.ERRATUM_ROW - 1)


def test_assemble_zero_vector_gives_base_rows(rng):
    ks = KeySet(tuple(keygen(4, rng) for _ in range(4)))
    m = assemble_matrix(ks, RegenVector(1, BitVector.zeros(4)))
    for i, k in enumerate(ks.keys):
        assert m.row(i) == base_row(k)


def test_assemble_is_deterministic():
    ks = reference_keyset()
    assert assemble_matrix(ks, NU24) == assemble_matrix(ks, NU24)


# ---------------------------------------------------------------------------
# keygen distribution


def test_keygen_n1(rng):
    k = keygen(1, rng)
    assert k.perm.mapping == (1,)
    assert list(k.mask) in ([0], [1])


def test_keygen_deterministic():
    assert keygen(8, random.Random(4242)) == keygen(8, random.Random(4242))


def test_keygen_permutations_uniform():
    rng = random.Random(777)
    draws = 6 * 10**4
    counts = {p: 0 for p in itertools.permutations((1, 2, 3))}
    for _ in range(draws):
        counts[keygen(3, rng).perm.mapping] += 1
    for p, c in counts.items():
        assert abs(c / draws - 1 / 6) < 0.01


def test_keygen_mask_bits_marginally_uniform():
    rng = random.Random(778)
    draws = 2 * 10**4
    ones = [0] * 4
    for _ in range(draws):
        for j, b in enumerate(keygen(4, rng).mask):
            ones[j] += b
    for o in ones:
        assert abs(o / draws - 0.5) < 0.02


def test_base_row_distribution_uniform_chi_square():
    # fixed permutation, uniform masks: the 16 base-row values at n=4 must
    # be uniform (chi-square, 15 dof, far below the 0.001 critical value)
    perm = Permutation((3, 1, 4, 2))
    rng = random.Random(333)
    draws = 10**5
    counts = [0] * 16
    for _ in range(draws):
        mask = BitVector.from_int(rng.getrandbits(4), 4)
        counts[base_row(InitialKey(perm, mask)).value] += 1
    expected = draws / 16
    chi2 = sum((c - expected) ** 2 / expected for c in counts)
    assert chi2 < 37.70  # chi-square(15 dof) at alpha = 0.001


# ---------------------------------------------------------------------------
# key-derived matrix law, exhaustively at n = 2


def test_key_derived_law_uniform_over_invertibles_n2():
    n = 2
    invertible_counts = {}
    singular = 0
    configs = 0
    for maps in itertools.product(itertools.permutations((1, 2)), repeat=2):
        for masks in itertools.product(range(4), repeat=2):
            keys = [
                InitialKey(Permutation(m), BitVector.from_int(b, n))
                for m, b in zip(maps, masks)
            ]
            for nu in range(4):
                configs += 1
                mat = assemble_matrix(
                    KeySet(tuple(keys)), RegenVector(1, BitVector.from_int(nu, n))
                )
                if brute_force_rank(list(mat.row_ints), n) == n:
                    invertible_counts[mat.row_ints] = (
                        invertible_counts.get(mat.row_ints, 0) + 1
                    )
                else:
                    singular += 1
    assert configs == 256
    assert len(invertible_counts) == 6
    counts = set(invertible_counts.values())
    assert len(counts) == 1  # exactly equal counts, not just close
    assert singular + sum(invertible_counts.values()) == 256


# ---------------------------------------------------------------------------
# validate_keyset / keyset_coherent


def test_validate_identity_base_rows_pass():
    assert validate_keyset(identity_base_keys(5)).ok


def test_validate_flags_duplicate_keys():
    k1 = key((1, 2), [1, 0])
    report = validate_keyset(KeySet((k1, k1)))
    assert not report.ok
    assert report.duplicate_pairs == ((1, 2),)


def test_validate_reference_keys_pass():
    report = validate_keyset(KeySet(tuple(reference_valid_keys())))
    assert report.ok
    assert report.duplicate_pairs == ()


def test_coherent_accepts_identity_base_rows():
    assert keyset_coherent(identity_base_keys(4))


def test_coherent_rejects_even_subset_dependency():
    # pairwise distinct base rows whose 4-subset XORs to zero: no vector
    # can ever make the matrix invertible, though validate_keyset passes
    ident = (1, 2, 3, 4)
    rows = [0b0001, 0b0010, 0b0100, 0b0111]
    ks = KeySet(
        tuple(InitialKey(Permutation(ident), BitVector.from_int(r, 4)) for r in rows)
    )
    assert validate_keyset(ks).ok
    assert not keyset_coherent(ks)
    with pytest.raises(KeySetIncoherent):
        sample_round_matrix(ks, 1, random.Random(1), max_retries=200)


# ---------------------------------------------------------------------------
# sample_round_matrix


def test_sample_accepts_identity_immediately():
    ks = identity_base_keys(4)
    rng = RiggedRandom([0])  # first vector draw is all-zeros
    nu, matrix, rejections = sample_round_matrix(ks, 9, rng)
    assert rejections == 0
    assert nu.round == 9
    assert nu.bits == BitVector.zeros(4)
    assert matrix == BitMatrix.identity(4)


def test_sample_rejects_equal_base_rows():
    zero = key((1, 2), [0, 0])
    ks = KeySet((zero, key((2, 1), [0, 0])))
    with pytest.raises(KeySetIncoherent):
        sample_round_matrix(ks, 1, random.Random(3), max_retries=50)


def test_sample_reference_keys_accept_reference_vector():
    ks = reference_keyset()
    rng = RiggedRandom([BitVector(demo.REFERENCE_REGEN_BITS).value])
    nu, matrix, rejections = sample_round_matrix(ks, 24, rng)
    assert rejections == 0
    assert nu.bits == BitVector(demo.REFERENCE_REGEN_BITS)
    assert brute_force_rank(list(matrix.row_ints), 7) == 7
    assert matrix == BitMatrix(demo.EXPECTED_MATRIX_ROWS)


def test_sample_returns_nonsingular_for_random_coherent_sets():
    rng = random.Random(17)
    for _ in range(20):
        ks = KeySet(tuple(keygen(5, rng) for _ in range(5)))
        if not keyset_coherent(ks):
            continue
        _, matrix, _ = sample_round_matrix(ks, 1, rng)
        assert gf2.rank(matrix) == 5


# ---------------------------------------------------------------------------
# serialization


def test_keyset_json_round_trip(tmp_path, rng):
    ks = KeySet(tuple(keygen(6, rng) for _ in range(6)))
    path = tmp_path / "keys.json"
    save_keyset(path, ks)
    assert load_keyset(path) == ks
    data = json.loads(path.read_text())
    assert data["n"] == 6
    assert len(data["keys"]) == 6
    assert all(sorted(entry["perm"]) == [1, 2, 3, 4, 5, 6] for entry in data["keys"])


def test_keyset_from_dict_rejects_wrong_count():
    entry = {"perm": [1, 2], "mask": [0, 1]}
    with pytest.raises(DimensionMismatch):
        keyset_from_dict({"n": 2, "keys": [entry]})


def test_keyset_dict_uses_one_based_permutations(rng):
    ks = KeySet(tuple(keygen(3, rng) for _ in range(3)))
    data = keyset_to_dict(ks)
    for entry in data["keys"]:
        assert min(entry["perm"]) == 1 and max(entry["perm"]) == 3
