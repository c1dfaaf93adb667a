"""Hashing, deterministic pseudo-random expansion, and digit encodings.

Everything here is pure given its inputs.  The one mutable object is the
invocation counter attached to a :class:`Hasher`; code that wants isolated
hash counts must own a private instance.
"""

from __future__ import annotations

import hashlib

from .errors import LengthError, ParamError

DEFAULT_ALGORITHM = "sha256"
MIN_SEED_OCTETS = 16
MAX_PRG_OCTETS = 1 << 16


class HashCounter:
    """Running count of one-way-function applications.

    Counts are the platform-independent cost proxy used by the benchmark
    harness in place of cycle counts.
    """

    __slots__ = ("invocations",)

    def __init__(self) -> None:
        self.invocations = 0

    def reset(self) -> None:
        self.invocations = 0


class Hasher:
    """A configured one-way function plus its invocation counter.

    The digest length is fixed by the algorithm (32 octets for the default);
    all key, signature, and tree-node sizes in this package scale from it.
    """

    def __init__(self, algorithm: str = DEFAULT_ALGORITHM):
        probe = hashlib.new(algorithm)
        self.algorithm = algorithm
        self.digest_len = probe.digest_size
        self.counter = HashCounter()
        self._new = getattr(hashlib, algorithm, None)
        if self._new is None:
            self._new = lambda data, _a=algorithm: hashlib.new(_a, data)

    @property
    def digest_bits(self) -> int:
        return self.digest_len * 8

    def hash(self, data: bytes) -> bytes:
        self.counter.invocations += 1
        return self._new(data).digest()


DEFAULT_HASHER = Hasher()


def _hasher(hasher: Hasher | None) -> Hasher:
    return DEFAULT_HASHER if hasher is None else hasher


def check_seed(seed: bytes) -> bytes:
    if not isinstance(seed, (bytes, bytearray)) or len(seed) < MIN_SEED_OCTETS:
        raise ParamError(f"seed must be at least {MIN_SEED_OCTETS} octets")
    return bytes(seed)


def prg_expand(seed: bytes, counter: int, out_len: int, hasher: Hasher | None = None) -> bytes:
    """Deterministic expansion of ``seed`` at position ``counter``.

    Output blocks are ``h(seed || counter_be8 || block_be4)`` concatenated and
    truncated to ``out_len``.  Distinct counters give unrelated streams, which
    is what lets private keys be regenerated on the fly from a stored seed.
    """
    check_seed(seed)
    if counter < 0:
        raise ParamError("counter must be non-negative")
    if out_len < 0:
        raise ParamError("out_len must be non-negative")
    if out_len > MAX_PRG_OCTETS:
        raise LengthError(f"out_len {out_len} exceeds maximum {MAX_PRG_OCTETS}")
    h = _hasher(hasher)
    prefix = seed + counter.to_bytes(8, "big")
    blocks = []
    produced = 0
    index = 0
    while produced < out_len:
        block = h.hash(prefix + index.to_bytes(4, "big"))
        blocks.append(block)
        produced += len(block)
        index += 1
    return b"".join(blocks)[:out_len]


def _digit_bits(b: int) -> int:
    if b < 2 or b > 256 or b & (b - 1):
        raise ParamError("base must be a power of two in [2, 256]")
    return b.bit_length() - 1


def digest_to_base_b(digest: bytes, b: int) -> list[int]:
    """Split a digest into base-``b`` digits, most-significant bit first.

    ``log2(b)`` must divide the digest bit-length so the digit count is exact.
    """
    w = _digit_bits(b)
    nbits = len(digest) * 8
    if nbits % w:
        raise ParamError(f"digest bit-length {nbits} not divisible by log2({b})")
    value = int.from_bytes(digest, "big")
    count = nbits // w
    mask = b - 1
    return [(value >> (w * (count - 1 - i))) & mask for i in range(count)]


def base_b_to_digest(coeffs: list[int], b: int) -> bytes:
    """Inverse of :func:`digest_to_base_b` for a full digit sequence."""
    w = _digit_bits(b)
    nbits = len(coeffs) * w
    if nbits % 8:
        raise ParamError("digit sequence does not pack into whole octets")
    value = 0
    for c in coeffs:
        if not 0 <= c < b:
            raise ParamError("digit out of range for base")
        value = (value << w) | c
    return value.to_bytes(nbits // 8, "big")


def checksum_digit_count(coeff_count: int, b: int) -> int:
    """Fixed width of the checksum field for ``coeff_count`` base-``b`` digits."""
    _digit_bits(b)
    if coeff_count < 1:
        raise ParamError("need at least one message digit")
    limit = coeff_count * (b - 1) + 1
    count = 1
    cap = b
    while cap < limit:
        cap *= b
        count += 1
    return count


def wots_checksum(msg_coeffs: list[int], b: int) -> list[int]:
    """Checksum digits ``C = sum(b-1 - c_i)`` in base ``b``, fixed width.

    Raising any message digit strictly lowers ``C``, so a tamperer who can
    only advance hash chains can never produce a matching checksum.
    """
    _digit_bits(b)
    total = 0
    for c in msg_coeffs:
        if not 0 <= c < b:
            raise ParamError("digit out of range for base")
        total += b - 1 - c
    width = checksum_digit_count(len(msg_coeffs), b)
    digits = []
    for i in range(width):
        shift = width - 1 - i
        digits.append((total // b**shift) % b)
    return digits
