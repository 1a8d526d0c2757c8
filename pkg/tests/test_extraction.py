import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdiqrng.core import InvalidInput
from mdiqrng.extraction import (
    ExtractorSpec,
    bits_from_hex,
    bits_to_hex,
    pack_bits,
    read_bitfile,
    toeplitz_extract,
    toeplitz_matrix,
    unpack_bits,
    write_bitfile,
)

# Golden 8 -> 4 instance. The output was computed by an explicit double loop
# over T[i, j] = seed[i - j] (i >= j) or seed[m - 1 + j - i] (i < j).
GOLDEN_SEED_HEX = "b3a0"  # 11 seed bits: 1011 0011 101
GOLDEN_INPUT = 0x96
GOLDEN_OUTPUT_BITS = [1, 0, 1, 1]
GOLDEN_OUTPUT_FILE = bytes.fromhex("0000000000000004b0")
GOLDEN_MATRIX = [
    [1, 0, 0, 1, 1, 1, 0, 1],
    [0, 1, 0, 0, 1, 1, 1, 0],
    [1, 0, 1, 0, 0, 1, 1, 1],
    [1, 1, 0, 1, 0, 0, 1, 1],
]


def int_bits(value, n):
    return np.array([(value >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.uint8)


def loop_extract(x, seed, m):
    n = len(x)
    out = []
    for i in range(m):
        acc = 0
        for j in range(n):
            t = seed[i - j] if i >= j else seed[m - 1 + j - i]
            acc ^= int(t) & int(x[j])
        out.append(acc)
    return np.array(out, dtype=np.uint8)


def test_golden_fixture():
    spec = ExtractorSpec(8, 4)
    seed = bits_from_hex(GOLDEN_SEED_HEX, spec.seed_length)
    assert seed.tolist() == [1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1]
    assert toeplitz_matrix(seed, spec).tolist() == GOLDEN_MATRIX
    out = toeplitz_extract(int_bits(GOLDEN_INPUT, 8), seed, spec)
    assert out.tolist() == GOLDEN_OUTPUT_BITS
    assert pack_bits(out) == GOLDEN_OUTPUT_FILE


def test_golden_matrix_against_all_inputs():
    spec = ExtractorSpec(8, 4)
    seed = bits_from_hex(GOLDEN_SEED_HEX, spec.seed_length)
    for v in range(256):
        x = int_bits(v, 8)
        assert np.array_equal(toeplitz_extract(x, seed, spec), loop_extract(x, seed, 4))


def test_empty_output_and_identity():
    assert toeplitz_extract([1, 0, 1], [], ExtractorSpec(3, 0)).size == 0
    n = 9
    seed = np.zeros(2 * n - 1, dtype=np.uint8)
    seed[0] = 1
    x = np.random.default_rng(0).integers(0, 2, n)
    assert np.array_equal(toeplitz_extract(x, seed, ExtractorSpec(n, n)), x)


def test_length_checks():
    with pytest.raises(InvalidInput):
        ExtractorSpec(4, 5)
    with pytest.raises(InvalidInput):
        toeplitz_extract([1, 0, 1], [1, 0, 1], ExtractorSpec(3, 2))
    with pytest.raises(InvalidInput):
        toeplitz_extract([1, 0], [1, 0, 1, 1], ExtractorSpec(3, 2))
    with pytest.raises(InvalidInput):
        toeplitz_extract([1, 2, 0], [1, 0, 1, 1], ExtractorSpec(3, 2))


def test_linearity_exhaustive():
    # every seed, every pair of inputs: E(x ^ y) = E(x) ^ E(y)
    n, m = 6, 3
    spec = ExtractorSpec(n, m)
    xs = np.arange(1 << n)
    for s in range(1 << spec.seed_length):
        seed = int_bits(s, spec.seed_length)
        table = np.array([toeplitz_extract(int_bits(v, n), seed, spec) for v in xs])
        lhs = table[xs[:, None] ^ xs[None, :]]
        rhs = table[:, None, :] ^ table[None, :, :]
        assert np.array_equal(lhs, rhs)


def _all_matrices(n, m):
    spec = ExtractorSpec(n, m)
    k = spec.seed_length
    seeds = ((np.arange(1 << k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    t = np.concatenate([seeds[:, m:][:, ::-1], seeds[:, :m]], axis=1)
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    stack = t[:, i - j + n - 1]
    # spot-check the vectorized construction against the library
    for idx in (0, 1, (1 << k) - 1, (1 << k) // 3):
        assert np.array_equal(stack[idx], toeplitz_matrix(seeds[idx], spec))
    return stack


@pytest.mark.parametrize("n, m", [(6, 2), (8, 3), (10, 4), (12, 3)])
def test_two_universality_exhaustive(n, m):
    """For every pair x != y, the fraction of seeds with T x = T y is at most
    2^-m + 2^-n. Collisions depend only on d = x ^ y, so all 2^n - 1
    differences against all seeds cover every pair."""
    stack = _all_matrices(n, m).astype(np.float32)
    diffs = ((np.arange(1, 1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.float32)
    collisions = np.zeros(diffs.shape[0])
    for chunk in np.array_split(stack, max(1, stack.shape[0] // 512)):
        prod = np.einsum("smn,dn->sdm", chunk, diffs) % 2
        collisions += np.all(prod == 0, axis=2).sum(axis=0)
    prob = collisions / stack.shape[0]
    assert prob.max() <= 2.0**-m + 2.0**-n


def test_fft_path_matches_matrix_path():
    rng = np.random.default_rng(2)
    n, m = 5000, 4000
    spec = ExtractorSpec(n, m)
    x = rng.integers(0, 2, n).astype(np.uint8)
    seed = rng.integers(0, 2, spec.seed_length).astype(np.uint8)
    fast = toeplitz_extract(x, seed, spec)
    slow = (toeplitz_matrix(seed, spec).astype(np.int64) @ x) % 2
    assert np.array_equal(fast, slow)


@given(st.lists(st.integers(0, 1), max_size=200))
def test_pack_round_trip(bits):
    assert unpack_bits(pack_bits(bits)).tolist() == bits


def test_pack_format_and_errors(tmp_path):
    assert pack_bits([1, 0, 1]) == bytes.fromhex("0000000000000003a0")
    with pytest.raises(InvalidInput):
        unpack_bits(b"\x00")
    with pytest.raises(InvalidInput):
        unpack_bits(bytes.fromhex("0000000000000010a0"))
    path = tmp_path / "bits.bin"
    write_bitfile(path, [1, 1, 0])
    assert read_bitfile(path).tolist() == [1, 1, 0]
    assert not (tmp_path / "bits.bin.tmp").exists()


def test_hex_helpers():
    assert bits_from_hex("0xA5").tolist() == [1, 0, 1, 0, 0, 1, 0, 1]
    assert bits_from_hex("f", 3).tolist() == [1, 1, 1]
    assert bits_to_hex([1, 0, 1, 0, 0, 1, 0, 1]) == "a5"
    with pytest.raises(InvalidInput):
        bits_from_hex("zz")
    with pytest.raises(InvalidInput):
        bits_from_hex("ff", 9)
