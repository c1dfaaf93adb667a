"""Hash abstraction, PRG expansion, and digit-encoding tests."""

import hashlib
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqsig import (
    Hasher,
    LengthError,
    ParamError,
    base_b_to_digest,
    checksum_digit_count,
    digest_to_base_b,
    prg_expand,
    wots_checksum,
)

SEED = b"0123456789abcdef"


def test_hash_matches_reference_implementation():
    # independent oracle: hashlib applied directly
    h = Hasher()
    assert h.hash(b"") == hashlib.sha256(b"").digest()
    assert h.hash(b"abc") == hashlib.sha256(b"abc").digest()


def test_hash_fixed_length_and_deterministic():
    h = Hasher()
    for data in (b"", b"x", b"y" * 1000):
        out = h.hash(data)
        assert len(out) == 32
        assert out == h.hash(data)


def test_hash_counter_increments_once_per_call():
    h = Hasher()
    start = h.counter.invocations
    h.hash(b"a")
    h.hash(b"b")
    assert h.counter.invocations == start + 2
    h.counter.reset()
    assert h.counter.invocations == 0


def test_prg_deterministic():
    h = Hasher()
    assert prg_expand(SEED, 0, 32, h) == prg_expand(SEED, 0, 32, h)


def test_prg_zero_length():
    assert prg_expand(SEED, 7, 0) == b""


def test_prg_length_cap():
    h = Hasher()
    assert len(prg_expand(SEED, 0, 1 << 16, h)) == 1 << 16
    with pytest.raises(LengthError):
        prg_expand(SEED, 0, (1 << 16) + 1, h)


def test_prg_rejects_short_seed_and_bad_counter():
    with pytest.raises(ParamError):
        prg_expand(b"short", 0, 16)
    with pytest.raises(ParamError):
        prg_expand(SEED, -1, 16)
    with pytest.raises(ParamError):
        prg_expand(SEED, 0, -1)


def _monobit_z(stream: bytes) -> float:
    # classic frequency test: sum of +-1 bits over sqrt(n)
    ones = sum(bin(byte).count("1") for byte in stream)
    n = len(stream) * 8
    return abs(2 * ones - n) / math.sqrt(n)


def test_prg_counters_give_independent_looking_streams():
    h = Hasher()
    n_bits = 10_000
    a = prg_expand(SEED, 0, n_bits // 8, h)
    b = prg_expand(SEED, 1, n_bits // 8, h)
    assert a != b
    # significance 0.01 two-sided: |z| below 2.5758
    assert _monobit_z(a) < 2.5758
    assert _monobit_z(b) < 2.5758
    xor = bytes(x ^ y for x, y in zip(a, b))
    assert _monobit_z(xor) < 2.5758


def test_base2_digits_are_the_bit_sequence():
    digest = bytes([0b10110001])
    assert digest_to_base_b(digest, 2) == [1, 0, 1, 1, 0, 0, 0, 1]


def test_base16_single_byte():
    assert digest_to_base_b(bytes([0xAB]), 16) == [0xA, 0xB]


def test_base_b_rejects_bad_bases():
    for bad in (0, 1, 3, 6, 12, 257, 512):
        with pytest.raises(ParamError):
            digest_to_base_b(b"\x00" * 4, bad)
    # log2(8)=3 does not divide 32 bits
    with pytest.raises(ParamError):
        digest_to_base_b(b"\x00" * 4, 8)


@settings(max_examples=60)
@given(st.binary(min_size=1, max_size=64), st.sampled_from([2, 4, 16, 256]))
def test_base_b_round_trip(data, b):
    coeffs = digest_to_base_b(data, b)
    w = b.bit_length() - 1
    assert len(coeffs) == len(data) * 8 // w
    assert all(0 <= c < b for c in coeffs)
    assert base_b_to_digest(coeffs, b) == data


def test_checksum_all_max_digits_is_zero():
    digits = wots_checksum([15] * 64, 16)
    assert all(d == 0 for d in digits)


def test_checksum_value_for_64_zero_digits_base16():
    # C = 64 * 15 = 960 = 3*256 + 12*16 + 0
    assert wots_checksum([0] * 64, 16) == [3, 12, 0]


def test_checksum_width_is_fixed():
    assert checksum_digit_count(64, 16) == 3
    assert checksum_digit_count(256, 2) == 9
    assert len(wots_checksum([0] * 64, 16)) == len(wots_checksum([15] * 64, 16))


def _digits_to_int(digits, b):
    value = 0
    for d in digits:
        value = value * b + d
    return value


@settings(max_examples=60)
@given(
    st.lists(st.integers(0, 15), min_size=1, max_size=67),
    st.data(),
)
def test_checksum_strictly_decreases_when_any_digit_rises(coeffs, data):
    b = 16
    candidates = [i for i, c in enumerate(coeffs) if c < b - 1]
    if not candidates:
        return
    i = data.draw(st.sampled_from(candidates))
    bumped = list(coeffs)
    bumped[i] += 1
    before = _digits_to_int(wots_checksum(coeffs, b), b)
    after = _digits_to_int(wots_checksum(bumped, b), b)
    assert after < before


def test_checksum_anti_forgery_componentwise_domination():
    # raising several digits at once still strictly lowers the checksum
    base = [3, 7, 0, 15, 2, 9]
    raised = [4, 7, 5, 15, 2, 10]
    b = 16
    lo = _digits_to_int(wots_checksum(raised, b), b)
    hi = _digits_to_int(wots_checksum(base, b), b)
    assert lo < hi


def test_checksum_rejects_out_of_range_digits():
    with pytest.raises(ParamError):
        wots_checksum([16], 16)
    with pytest.raises(ParamError):
        wots_checksum([-1], 16)
