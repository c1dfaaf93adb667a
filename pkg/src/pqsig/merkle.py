"""Merkle multi-time signatures over seed-derived one-time keys.

The public key is a single root digest.  Signing walks leaves left to right,
regenerating one-time keys from the seed and recomputing uncached subtrees
with a bounded-memory treehash.  The signer is stateful: the next unused leaf
index must advance durably (see :mod:`pqsig.keystore`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

from .errors import KeyExhausted, ParamError
from .ots import (
    OtsKind,
    OtsParams,
    OtsPublicKey,
    OtsSignature,
    ots_gen,
    ots_pk_from_sig,
    ots_sign,
    ots_verify,
)
from .primitives import Hasher, _hasher, check_seed


@dataclass(frozen=True)
class TreeParams:
    height: int
    ots: OtsParams

    def __post_init__(self):
        if self.height < 0:
            raise ParamError("tree height must be non-negative")

    @property
    def leaf_count(self) -> int:
        return 1 << self.height


@dataclass(frozen=True)
class AuthPath:
    """Sibling digests from leaf level upward, proving one leaf to the root."""

    leaf_index: int
    siblings: tuple[bytes, ...]


@dataclass(frozen=True)
class MtsSignature:
    leaf_index: int
    ots_sig: OtsSignature
    auth_path: AuthPath
    # Lamport public keys cannot be rebuilt from revealed secrets, so for
    # those kinds the leaf public key rides along in the signature.
    ots_pub: tuple[bytes, ...] | None = None


@dataclass(frozen=True)
class MtsPublicKey:
    root: bytes
    params: TreeParams


@dataclass
class SignerState:
    """Everything the signer must retain between signatures.

    ``cached_nodes`` holds every tree node at the top ``cache_levels + 1``
    levels, keyed by (level, index) with leaves at level 0.  Each extra cached
    level halves the subtree recomputation done per signature.
    """

    seed: bytes
    params: TreeParams
    next_index: int
    cache_levels: int
    cached_nodes: dict[tuple[int, int], bytes] = field(default_factory=dict)

    @property
    def exhausted(self) -> bool:
        return self.next_index >= self.params.leaf_count


@dataclass
class TreehashStats:
    peak_stack: int = 0
    combines: int = 0


@dataclass
class SignStats:
    leaf_regens: int = 0


def treehash(
    leaf_at: Callable[[int], bytes],
    height: int,
    hasher: Hasher | None = None,
    stats: TreehashStats | None = None,
    on_node: Callable[[int, int, bytes], None] | None = None,
) -> bytes:
    """Left-to-right root computation holding at most ``height + 1`` nodes.

    Whenever two nodes of equal level sit on top of the stack they are merged
    immediately, so finished subtrees are dropped as soon as their parent
    exists.  ``on_node`` observes every node (level, index, digest) computed,
    leaves included.
    """
    h = _hasher(hasher)
    stack: list[tuple[int, int, bytes]] = []
    for i in range(1 << height):
        level, index, node = 0, i, leaf_at(i)
        if on_node:
            on_node(level, index, node)
        while stack and stack[-1][0] == level:
            _, _, left = stack.pop()
            node = h.hash(left + node)
            level += 1
            index >>= 1
            if stats:
                stats.combines += 1
            if on_node:
                on_node(level, index, node)
        stack.append((level, index, node))
        if stats and len(stack) > stats.peak_stack:
            stats.peak_stack = len(stack)
    assert len(stack) == 1 and stack[0][0] == height
    return stack[0][2]


def _leaf_digest(pk: OtsPublicKey, hasher: Hasher) -> bytes:
    return hasher.hash(pk.to_bytes())


def _leaf_provider(
    seed: bytes,
    ots_params: OtsParams,
    hasher: Hasher,
    stats: SignStats | None = None,
) -> Callable[[int], bytes]:
    def leaf_at(i: int) -> bytes:
        if stats:
            stats.leaf_regens += 1
        _, pk = ots_gen(seed, i, ots_params, hasher)
        return _leaf_digest(pk, hasher)

    return leaf_at


def mts_keygen(
    seed: bytes,
    params: TreeParams,
    cache_levels: int = 0,
    hasher: Hasher | None = None,
) -> tuple[MtsPublicKey, SignerState]:
    """Build the tree once, keep the root and the requested top levels."""
    check_seed(seed)
    if not 0 <= cache_levels <= params.height:
        raise ParamError("cache_levels must lie in [0, height]")
    h = _hasher(hasher)
    keep_from = params.height - cache_levels
    cached: dict[tuple[int, int], bytes] = {}

    def on_node(level: int, index: int, node: bytes) -> None:
        if level >= keep_from:
            cached[(level, index)] = node

    root = treehash(_leaf_provider(seed, params.ots, h), params.height, h, on_node=on_node)
    state = SignerState(bytes(seed), params, 0, cache_levels, cached)
    return MtsPublicKey(root, params), state


def mts_sign(
    state: SignerState,
    digest: bytes,
    hasher: Hasher | None = None,
    stats: SignStats | None = None,
) -> tuple[MtsSignature, SignerState]:
    """Sign with the next unused leaf; returns the advanced state.

    The input state is not mutated.  Callers that persist state must commit
    the advanced copy before releasing the signature (see
    :class:`pqsig.keystore.PersistentSigner`).
    """
    if state.exhausted:
        raise KeyExhausted(f"all {state.params.leaf_count} leaves consumed")
    h = _hasher(hasher)
    m = state.params.height
    index = state.next_index
    keep_from = m - state.cache_levels

    if stats:
        stats.leaf_regens += 1
    sk, pk = ots_gen(state.seed, index, state.params.ots, h)
    ots_sig = ots_sign(sk, digest, h)

    siblings = []
    for level in range(m):
        sib = (index >> level) ^ 1
        if level >= keep_from:
            node = state.cached_nodes[(level, sib)]
        else:
            base = sib << level
            sub_leaf = _leaf_provider(state.seed, state.params.ots, h, stats)
            node = treehash(lambda t, base=base: sub_leaf(base + t), level, h)
        siblings.append(node)

    embedded = None if state.params.ots.kind is OtsKind.WINTERNITZ else pk.elements
    sig = MtsSignature(index, ots_sig, AuthPath(index, tuple(siblings)), embedded)
    return sig, replace(state, next_index=index + 1)


def mts_verify(
    root: bytes | MtsPublicKey,
    digest: bytes,
    sig: MtsSignature,
    hasher: Hasher | None = None,
) -> bool:
    """Rebuild the leaf from the signature and fold the auth path to the root."""
    if isinstance(root, MtsPublicKey):
        root = root.root
    h = _hasher(hasher)
    m = len(sig.auth_path.siblings)
    if sig.auth_path.leaf_index != sig.leaf_index:
        raise ParamError("auth path and signature disagree on the leaf index")
    if not 0 <= sig.leaf_index < (1 << m):
        raise ParamError("leaf index out of range for the path length")
    if any(len(s) != h.digest_len for s in sig.auth_path.siblings):
        raise ParamError("auth path sibling has wrong length")

    params = sig.ots_sig.params
    if params.kind is OtsKind.WINTERNITZ:
        # Completing the chains yields the public key; a bad signature lands
        # on a wrong leaf and fails the root comparison below.
        pk = ots_pk_from_sig(sig.ots_sig, digest, h)
    else:
        if sig.ots_pub is None:
            raise ParamError("Lamport-kind signatures must embed the leaf public key")
        pk = OtsPublicKey(params, sig.ots_pub)
        if not ots_verify(pk, digest, sig.ots_sig, h):
            return False

    node = _leaf_digest(pk, h)
    for level, sibling in enumerate(sig.auth_path.siblings):
        if (sig.leaf_index >> level) & 1:
            node = h.hash(sibling + node)
        else:
            node = h.hash(node + sibling)
    return node == root
