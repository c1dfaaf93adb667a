"""Bit-exact serialization and crash-safe signer-state persistence.

Every object travels in the same envelope:

    magic "PQSL" | version u8 | scheme_id u8 | body_len u32le | body | crc32 u32le

The crc covers header plus body, so any single corrupted byte surfaces as a
FormatError instead of a silently different object.  Scheme ids: 1 Lamport,
2 Lamport-zeros, 3 Winternitz, 4 Merkle multi-time, 5 lattice.  The first
body octet tags the object kind (1 private key, 2 public key, 3 signature,
4 state record).

State files follow write-to-temporary / atomic-rename: a crash at any point
leaves either the previous or the new record on disk, never a torn one, and
the signing wrapper commits the advanced state before a signature is ever
released.  The conservative ordering can waste a leaf on crash but can never
reuse one.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .errors import FormatError, ParamError, StateError, StateRegressionError
from .lattice import LatticeBasis, LatticeKeyPair, LatticeSignature
from .merkle import (
    AuthPath,
    MtsPublicKey,
    MtsSignature,
    SignerState,
    TreeParams,
    mts_sign,
)
from .ots import OtsKind, OtsParams, OtsPrivateKey, OtsPublicKey, OtsSignature
from .primitives import Hasher

MAGIC = b"PQSL"
VERSION = 1

SCHEME_LAMPORT = 1
SCHEME_LAMPORT_ZEROS = 2
SCHEME_WINTERNITZ = 3
SCHEME_MERKLE = 4
SCHEME_LATTICE = 5

KIND_PRIVATE = 1
KIND_PUBLIC = 2
KIND_SIGNATURE = 3
KIND_STATE = 4

_OTS_SCHEME_IDS = {
    OtsKind.LAMPORT: SCHEME_LAMPORT,
    OtsKind.LAMPORT_ZEROS: SCHEME_LAMPORT_ZEROS,
    OtsKind.WINTERNITZ: SCHEME_WINTERNITZ,
}
_OTS_KINDS = {v: k for k, v in _OTS_SCHEME_IDS.items()}


@dataclass(frozen=True)
class StateRecord:
    """A signer state plus the monotone generation counter of its commit."""

    generation: int
    state: SignerState


# ---------------------------------------------------------------------------
# primitive packing


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("body", "truncated payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError("body", "trailing bytes")


def _pack_bytes(b: bytes) -> bytes:
    return struct.pack("<I", len(b)) + b


def _read_bytes(r: _Reader) -> bytes:
    (n,) = r.unpack("<I")
    return r.take(n)


def _pack_int(x: int) -> bytes:
    n = max(1, (x.bit_length() + 8) // 8)
    return struct.pack("<H", n) + x.to_bytes(n, "little", signed=True)


def _read_int(r: _Reader) -> int:
    (n,) = r.unpack("<H")
    return int.from_bytes(r.take(n), "little", signed=True)


def _pack_elements(elements: tuple[bytes, ...]) -> bytes:
    if elements and any(len(e) != len(elements[0]) for e in elements):
        raise ParamError("elements must share one length")
    elem_len = len(elements[0]) if elements else 0
    return struct.pack("<IH", len(elements), elem_len) + b"".join(elements)


def _read_elements(r: _Reader) -> tuple[bytes, ...]:
    count, elem_len = r.unpack("<IH")
    return tuple(r.take(elem_len) for _ in range(count))


def _pack_ots_params(params: OtsParams) -> bytes:
    return struct.pack("<BHH", _OTS_SCHEME_IDS[params.kind], params.n, params.b)


def _read_ots_params(r: _Reader) -> OtsParams:
    kind_id, n, b = r.unpack("<BHH")
    if kind_id not in _OTS_KINDS:
        raise FormatError("scheme_id", f"unknown one-time kind {kind_id}")
    try:
        return OtsParams(_OTS_KINDS[kind_id], n, b)
    except ParamError as exc:
        raise FormatError("body", str(exc)) from exc


def _pack_tree_params(params: TreeParams) -> bytes:
    return struct.pack("<H", params.height) + _pack_ots_params(params.ots)


def _read_tree_params(r: _Reader) -> TreeParams:
    (height,) = r.unpack("<H")
    return TreeParams(height, _read_ots_params(r))


def _pack_matrix(basis: LatticeBasis) -> bytes:
    out = [struct.pack("<H", basis.dim)]
    for col in basis.columns:
        out.extend(_pack_int(v) for v in col)
    return b"".join(out)


def _read_matrix(r: _Reader) -> LatticeBasis:
    (dim,) = r.unpack("<H")
    if dim < 1:
        raise FormatError("body", "matrix dimension must be positive")
    cols = tuple(tuple(_read_int(r) for _ in range(dim)) for _ in range(dim))
    return LatticeBasis(cols)


def _pack_fraction(f: Fraction) -> bytes:
    return _pack_int(f.numerator) + _pack_int(f.denominator)


def _read_fraction(r: _Reader) -> Fraction:
    num = _read_int(r)
    den = _read_int(r)
    if den == 0:
        raise FormatError("body", "zero denominator")
    return Fraction(num, den)


# ---------------------------------------------------------------------------
# body encodings per object


def _body_ots_private(key: OtsPrivateKey) -> bytes:
    return (
        bytes([KIND_PRIVATE])
        + _pack_ots_params(key.params)
        + _pack_bytes(key.seed)
        + struct.pack("<QB", key.leaf_index, 1 if key.used else 0)
    )


def _body_ots_public(key: OtsPublicKey) -> bytes:
    return bytes([KIND_PUBLIC]) + _pack_ots_params(key.params) + _pack_elements(key.elements)


def _body_ots_signature(sig: OtsSignature) -> bytes:
    return bytes([KIND_SIGNATURE]) + _pack_ots_params(sig.params) + _pack_elements(sig.revealed)


def _body_mts_public(key: MtsPublicKey) -> bytes:
    return bytes([KIND_PUBLIC]) + _pack_tree_params(key.params) + _pack_bytes(key.root)


def _body_mts_signature(sig: MtsSignature) -> bytes:
    out = [
        bytes([KIND_SIGNATURE]),
        struct.pack("<Q", sig.leaf_index),
        _pack_ots_params(sig.ots_sig.params),
        _pack_elements(sig.ots_sig.revealed),
        _pack_elements(sig.auth_path.siblings),
    ]
    if sig.ots_pub is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01" + _pack_elements(sig.ots_pub))
    return b"".join(out)


def _body_state_record(record: StateRecord) -> bytes:
    state = record.state
    out = [
        bytes([KIND_STATE]),
        struct.pack("<Q", record.generation),
        _pack_bytes(state.seed),
        _pack_tree_params(state.params),
        struct.pack("<QH", state.next_index, state.cache_levels),
        struct.pack("<I", len(state.cached_nodes)),
    ]
    elem_len = None
    for (level, index), digest in sorted(state.cached_nodes.items()):
        if elem_len is None:
            elem_len = len(digest)
            out.append(struct.pack("<H", elem_len))
        out.append(struct.pack("<HQ", level, index) + digest)
    if elem_len is None:
        out.append(struct.pack("<H", 0))
    return b"".join(out)


def _body_lattice_private(kp: LatticeKeyPair) -> bytes:
    return (
        bytes([KIND_PRIVATE])
        + _pack_matrix(kp.b_priv)
        + _pack_matrix(kp.b_pub)
        + _pack_fraction(kp.beta_sq)
    )


@dataclass(frozen=True)
class LatticePublicKey:
    basis: LatticeBasis
    beta_sq: Fraction


def _body_lattice_public(key: LatticePublicKey) -> bytes:
    return bytes([KIND_PUBLIC]) + _pack_matrix(key.basis) + _pack_fraction(key.beta_sq)


def _body_lattice_signature(sig: LatticeSignature) -> bytes:
    if len(sig.salt) != 16:
        raise ParamError("lattice salt must be 16 octets")
    out = [bytes([KIND_SIGNATURE]), sig.salt, struct.pack("<H", len(sig.s))]
    for v in sig.s:
        if not -(1 << 63) <= v < (1 << 63):
            raise ParamError("signature coordinate out of 64-bit range")
        out.append(struct.pack("<q", v))
    return b"".join(out)


# ---------------------------------------------------------------------------
# envelope


def _envelope(scheme_id: int, body: bytes) -> bytes:
    head = MAGIC + struct.pack("<BBI", VERSION, scheme_id, len(body)) + body
    return head + struct.pack("<I", zlib.crc32(head))


def encode(obj) -> bytes:
    """Canonical encoding; ``decode`` inverts it exactly."""
    if isinstance(obj, OtsPrivateKey):
        return _envelope(_OTS_SCHEME_IDS[obj.params.kind], _body_ots_private(obj))
    if isinstance(obj, OtsPublicKey):
        return _envelope(_OTS_SCHEME_IDS[obj.params.kind], _body_ots_public(obj))
    if isinstance(obj, OtsSignature):
        return _envelope(_OTS_SCHEME_IDS[obj.params.kind], _body_ots_signature(obj))
    if isinstance(obj, MtsPublicKey):
        return _envelope(SCHEME_MERKLE, _body_mts_public(obj))
    if isinstance(obj, MtsSignature):
        return _envelope(SCHEME_MERKLE, _body_mts_signature(obj))
    if isinstance(obj, StateRecord):
        return _envelope(SCHEME_MERKLE, _body_state_record(obj))
    if isinstance(obj, LatticeKeyPair):
        return _envelope(SCHEME_LATTICE, _body_lattice_private(obj))
    if isinstance(obj, LatticePublicKey):
        return _envelope(SCHEME_LATTICE, _body_lattice_public(obj))
    if isinstance(obj, LatticeSignature):
        return _envelope(SCHEME_LATTICE, _body_lattice_signature(obj))
    raise ParamError(f"cannot encode {type(obj).__name__}")


def decode(data: bytes):
    """Parse an envelope back into its object, validating every field."""
    if len(data) < 14:
        raise FormatError("length", "shorter than a minimal envelope")
    if data[:4] != MAGIC:
        raise FormatError("magic", "bad magic")
    version, scheme_id, body_len = struct.unpack_from("<BBI", data, 4)
    if version != VERSION:
        raise FormatError("version", f"unsupported version {version}")
    if len(data) != 14 + body_len:
        raise FormatError("body_len", "length field does not match data")
    (crc,) = struct.unpack_from("<I", data, 10 + body_len)
    if crc != zlib.crc32(data[: 10 + body_len]):
        raise FormatError("crc32", "checksum mismatch")
    body = data[10 : 10 + body_len]
    if not body:
        raise FormatError("body", "empty body")
    kind = body[0]
    r = _Reader(body[1:])
    try:
        obj = _decode_body(scheme_id, kind, r)
        r.done()
    except struct.error as exc:
        raise FormatError("body", str(exc)) from exc
    return obj


def _decode_body(scheme_id: int, kind: int, r: _Reader):
    if scheme_id in _OTS_KINDS:
        params = _read_ots_params(r)
        if _OTS_SCHEME_IDS[params.kind] != scheme_id:
            raise FormatError("scheme_id", "envelope and parameter kinds disagree")
        if kind == KIND_PRIVATE:
            seed = _read_bytes(r)
            leaf_index, used = r.unpack("<QB")
            return OtsPrivateKey(params, seed, leaf_index, used=bool(used))
        if kind == KIND_PUBLIC:
            return OtsPublicKey(params, _read_elements(r))
        if kind == KIND_SIGNATURE:
            return OtsSignature(params, _read_elements(r))
        raise FormatError("body", f"unknown object kind {kind}")
    if scheme_id == SCHEME_MERKLE:
        if kind == KIND_PUBLIC:
            params = _read_tree_params(r)
            return MtsPublicKey(_read_bytes(r), params)
        if kind == KIND_SIGNATURE:
            (leaf_index,) = r.unpack("<Q")
            params = _read_ots_params(r)
            revealed = _read_elements(r)
            siblings = _read_elements(r)
            has_pub = r.take(1)[0]
            ots_pub = _read_elements(r) if has_pub else None
            return MtsSignature(
                leaf_index,
                OtsSignature(params, revealed),
                AuthPath(leaf_index, siblings),
                ots_pub,
            )
        if kind == KIND_STATE:
            (generation,) = r.unpack("<Q")
            seed = _read_bytes(r)
            params = _read_tree_params(r)
            next_index, cache_levels = r.unpack("<QH")
            (count,) = r.unpack("<I")
            (elem_len,) = r.unpack("<H")
            cached = {}
            for _ in range(count):
                level, index = r.unpack("<HQ")
                cached[(level, index)] = r.take(elem_len)
            state = SignerState(seed, params, next_index, cache_levels, cached)
            return StateRecord(generation, state)
        raise FormatError("body", f"unknown object kind {kind}")
    if scheme_id == SCHEME_LATTICE:
        if kind == KIND_PRIVATE:
            priv = _read_matrix(r)
            pub = _read_matrix(r)
            return LatticeKeyPair(priv, pub, None, _read_fraction(r))
        if kind == KIND_PUBLIC:
            return LatticePublicKey(_read_matrix(r), _read_fraction(r))
        if kind == KIND_SIGNATURE:
            salt = r.take(16)
            (dim,) = r.unpack("<H")
            coords = tuple(r.unpack("<q")[0] for _ in range(dim))
            return LatticeSignature(salt, coords)
        raise FormatError("body", f"unknown object kind {kind}")
    raise FormatError("scheme_id", f"unknown scheme {scheme_id}")


# ---------------------------------------------------------------------------
# crash-safe state persistence


class StateStore:
    """Single-owner store for one signer's state file.

    ``fault_hook``, when given, is called with a stage name at each point of
    the commit sequence ("pre_temp", "mid_temp", "pre_rename", "post_rename")
    and may raise to simulate a crash there; the fault-injection tests drive
    it.  Readers only ever see fully committed records because commits land
    via atomic rename.
    """

    def __init__(self, path: str | Path, fault_hook: Callable[[str], None] | None = None):
        self.path = Path(path)
        self.tmp_path = self.path.with_name(self.path.name + ".tmp")
        self.fault_hook = fault_hook

    def _fault(self, stage: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(stage)

    def load(self) -> StateRecord | None:
        """Read the last committed record; a leftover temp file is ignored."""
        if not self.path.exists():
            return None
        record = decode(self.path.read_bytes())
        if not isinstance(record, StateRecord):
            raise FormatError("body", "state file does not hold a state record")
        return record

    def commit(self, state: SignerState) -> StateRecord:
        """Durably advance to ``state``; refuses to move the index backwards."""
        previous = self.load()
        if previous is not None:
            if state.next_index < previous.state.next_index:
                raise StateRegressionError(
                    f"next_index {state.next_index} < committed "
                    f"{previous.state.next_index}"
                )
            generation = previous.generation + 1
        else:
            generation = 1
        record = StateRecord(generation, state)
        blob = encode(record)

        self._fault("pre_temp")
        with open(self.tmp_path, "wb") as fh:
            fh.write(blob[: len(blob) // 2])
            self._fault("mid_temp")
            fh.write(blob[len(blob) // 2 :])
            fh.flush()
            os.fsync(fh.fileno())
        self._fault("pre_rename")
        os.replace(self.tmp_path, self.path)
        self._fault("post_rename")
        return record


class PersistentSigner:
    """Merkle signer that commits state before releasing any signature.

    If the commit fails the signature is withheld and StateError raised; on
    reload the signer resumes from the last committed index, so a leaf can be
    skipped by a crash but never emitted twice.
    """

    def __init__(self, store: StateStore, hasher: Hasher | None = None):
        record = store.load()
        if record is None:
            raise StateError(f"no committed state at {store.path}")
        self.store = store
        self.hasher = hasher
        self._state = record.state

    @property
    def state(self) -> SignerState:
        return self._state

    def sign(self, digest: bytes) -> MtsSignature:
        sig, advanced = mts_sign(self._state, digest, self.hasher)
        try:
            self.store.commit(advanced)
        except StateRegressionError:
            raise
        except Exception as exc:
            raise StateError("state commit failed; signature withheld") from exc
        self._state = advanced
        return sig
