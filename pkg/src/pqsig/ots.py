"""One-time signatures: Lamport, the zeros-plus-checksum variant, and Winternitz.

All private material is derived from a seed and a leaf index through the
deterministic expander, so a signer only ever needs to store the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import KeyReuseError, ParamError
from .primitives import (
    Hasher,
    _hasher,
    check_seed,
    checksum_digit_count,
    digest_to_base_b,
    prg_expand,
    wots_checksum,
)

_MAX_LEAF_INDEX = 1 << 32


class OtsKind(str, Enum):
    LAMPORT = "lamport"
    LAMPORT_ZEROS = "lamport-zeros"
    WINTERNITZ = "winternitz"


@dataclass(frozen=True)
class OtsParams:
    """Scheme selector plus the signed-digest bit-length ``n``.

    ``b`` is the Winternitz chain base and is ignored by the Lamport kinds.
    """

    kind: OtsKind
    n: int = 256
    b: int = 16

    def __post_init__(self):
        if not isinstance(self.kind, OtsKind):
            object.__setattr__(self, "kind", OtsKind(self.kind))
        if self.n <= 0 or self.n % 8:
            raise ParamError("digest bit-length must be a positive multiple of 8")
        if self.kind is OtsKind.WINTERNITZ:
            if self.b < 2 or self.b > 256 or self.b & (self.b - 1):
                raise ParamError("Winternitz base must be a power of two in [2, 256]")
            if self.n % (self.b.bit_length() - 1):
                raise ParamError("log2(b) must divide the digest bit-length")

    @property
    def digest_octets(self) -> int:
        return self.n // 8

    @property
    def msg_digit_count(self) -> int:
        return self.n // (self.b.bit_length() - 1)

    @property
    def checksum_digit_count(self) -> int:
        if self.kind is OtsKind.WINTERNITZ:
            return checksum_digit_count(self.msg_digit_count, self.b)
        return checksum_digit_count(self.n, 2)

    @property
    def chain_count(self) -> int:
        return self.msg_digit_count + self.checksum_digit_count

    @property
    def secret_count(self) -> int:
        if self.kind is OtsKind.LAMPORT:
            return 2 * self.n
        if self.kind is OtsKind.LAMPORT_ZEROS:
            return self.n + self.checksum_digit_count
        return self.chain_count


@dataclass
class OtsPrivateKey:
    """Secret chain starts plus the (seed, index) provenance they derive from.

    The materialized secrets are a cache: equality and serialization only use
    the provenance, which is what a constrained signer would store.
    """

    params: OtsParams
    seed: bytes
    leaf_index: int
    used: bool = False
    _secrets: tuple[bytes, ...] | None = field(default=None, compare=False, repr=False)

    def secrets(self, hasher: Hasher | None = None) -> tuple[bytes, ...]:
        if self._secrets is None:
            self._secrets = _derive_secrets(self.seed, self.leaf_index, self.params, hasher)
        return self._secrets


@dataclass(frozen=True)
class OtsPublicKey:
    params: OtsParams
    elements: tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        """Canonical concatenation used as the Merkle leaf preimage."""
        return b"".join(self.elements)


@dataclass(frozen=True)
class OtsSignature:
    params: OtsParams
    revealed: tuple[bytes, ...]


def _digest_bits(digest: bytes) -> list[int]:
    value = int.from_bytes(digest, "big")
    nbits = len(digest) * 8
    return [(value >> (nbits - 1 - i)) & 1 for i in range(nbits)]


def _extended_bits(digest: bytes) -> list[int]:
    # digest bits followed by the zero-count checksum, both signed zeros-only
    bits = _digest_bits(digest)
    return bits + wots_checksum(bits, 2)


def _winternitz_digits(digest: bytes, params: OtsParams) -> list[int]:
    msg = digest_to_base_b(digest, params.b)
    return msg + wots_checksum(msg, params.b)


def _chain(value: bytes, steps: int, hasher: Hasher) -> bytes:
    for _ in range(steps):
        value = hasher.hash(value)
    return value


def _derive_secrets(
    seed: bytes, leaf_index: int, params: OtsParams, hasher: Hasher | None
) -> tuple[bytes, ...]:
    check_seed(seed)
    if not 0 <= leaf_index < _MAX_LEAF_INDEX:
        raise ParamError("leaf index out of range")
    h = _hasher(hasher)
    base = leaf_index << 32
    return tuple(
        prg_expand(seed, base | i, h.digest_len, h) for i in range(params.secret_count)
    )


def ots_gen(
    seed: bytes, leaf_index: int, params: OtsParams, hasher: Hasher | None = None
) -> tuple[OtsPrivateKey, OtsPublicKey]:
    """Derive the key pair for one leaf.  Deterministic in (seed, index, params)."""
    h = _hasher(hasher)
    secrets = _derive_secrets(seed, leaf_index, params, h)
    if params.kind is OtsKind.WINTERNITZ:
        elements = tuple(_chain(s, params.b - 1, h) for s in secrets)
    else:
        elements = tuple(h.hash(s) for s in secrets)
    sk = OtsPrivateKey(params, bytes(seed), leaf_index, _secrets=secrets)
    return sk, OtsPublicKey(params, elements)


def _check_digest(digest: bytes, params: OtsParams) -> None:
    if len(digest) != params.digest_octets:
        raise ParamError(
            f"digest must be {params.digest_octets} octets for n={params.n}"
        )


def ots_sign(sk: OtsPrivateKey, digest: bytes, hasher: Hasher | None = None) -> OtsSignature:
    """Consume the key to sign one digest.  A second call raises KeyReuseError."""
    params = sk.params
    _check_digest(digest, params)
    if sk.used:
        raise KeyReuseError("one-time key already consumed")
    h = _hasher(hasher)
    secrets = sk.secrets(h)
    if params.kind is OtsKind.LAMPORT:
        bits = _digest_bits(digest)
        revealed = tuple(secrets[2 * k + bit] for k, bit in enumerate(bits))
    elif params.kind is OtsKind.LAMPORT_ZEROS:
        ext = _extended_bits(digest)
        revealed = tuple(secrets[k] for k, bit in enumerate(ext) if bit == 0)
    else:
        digits = _winternitz_digits(digest, params)
        revealed = tuple(_chain(secrets[i], c, h) for i, c in enumerate(digits))
    sk.used = True
    return OtsSignature(params, revealed)


def ots_verify(
    pk: OtsPublicKey, digest: bytes, sig: OtsSignature, hasher: Hasher | None = None
) -> bool:
    """Check every revealed value against the public elements.

    Shape mismatches raise ParamError; a clean ``False`` always means the
    hashes genuinely disagree.
    """
    params = pk.params
    if sig.params != params:
        raise ParamError("signature and public key parameters differ")
    _check_digest(digest, params)
    if len(pk.elements) != params.secret_count:
        raise ParamError("public key element count does not match parameters")
    h = _hasher(hasher)
    elem_len = h.digest_len
    if any(len(r) != elem_len for r in sig.revealed):
        raise ParamError("revealed element has wrong length")

    if params.kind is OtsKind.LAMPORT:
        if len(sig.revealed) != params.n:
            raise ParamError("Lamport signature must reveal one secret per bit")
        bits = _digest_bits(digest)
        return all(
            h.hash(sig.revealed[k]) == pk.elements[2 * k + bit]
            for k, bit in enumerate(bits)
        )

    if params.kind is OtsKind.LAMPORT_ZEROS:
        ext = _extended_bits(digest)
        zero_positions = [k for k, bit in enumerate(ext) if bit == 0]
        if len(sig.revealed) != len(zero_positions):
            raise ParamError("reveal count does not match the digest's zero count")
        return all(
            h.hash(r) == pk.elements[k] for k, r in zip(zero_positions, sig.revealed)
        )

    if len(sig.revealed) != params.chain_count:
        raise ParamError("Winternitz signature must reveal one element per chain")
    digits = _winternitz_digits(digest, params)
    return all(
        _chain(r, params.b - 1 - c, h) == pk.elements[i]
        for i, (r, c) in enumerate(zip(sig.revealed, digits))
    )


def ots_pk_from_sig(
    sig: OtsSignature, digest: bytes, hasher: Hasher | None = None
) -> OtsPublicKey:
    """Rebuild the Winternitz public key implied by a signature.

    Only chain-based keys are recoverable this way: completing each chain to
    ``b-1`` applications lands on the public element.  Lamport keys reveal
    only half their elements and raise ParamError.
    """
    params = sig.params
    if params.kind is not OtsKind.WINTERNITZ:
        raise ParamError("public key is only recoverable for Winternitz signatures")
    _check_digest(digest, params)
    if len(sig.revealed) != params.chain_count:
        raise ParamError("Winternitz signature must reveal one element per chain")
    h = _hasher(hasher)
    digits = _winternitz_digits(digest, params)
    elements = tuple(
        _chain(r, params.b - 1 - c, h) for r, c in zip(sig.revealed, digits)
    )
    return OtsPublicKey(params, elements)
