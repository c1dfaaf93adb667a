"""Hash-based and lattice-based signature schemes with a benchmark harness.

Schemes: Lamport and Winternitz one-time signatures, Merkle multi-time
signatures over seed-derived leaves, and a short/long-basis lattice scheme
with Babai rounding, plus the moment-based key-leakage attack against it.
"""

from .errors import (
    AttackInconclusive,
    DegenerateBasis,
    FormatError,
    IncompleteGrid,
    KeyExhausted,
    KeyReuseError,
    LengthError,
    ParamError,
    PqsigError,
    SigningFailure,
    StateError,
    StateRegressionError,
)
from .primitives import (
    Hasher,
    HashCounter,
    base_b_to_digest,
    checksum_digit_count,
    digest_to_base_b,
    prg_expand,
    wots_checksum,
)
from .ots import (
    OtsKind,
    OtsParams,
    OtsPrivateKey,
    OtsPublicKey,
    OtsSignature,
    ots_gen,
    ots_pk_from_sig,
    ots_sign,
    ots_verify,
)
from .merkle import (
    AuthPath,
    MtsPublicKey,
    MtsSignature,
    SignerState,
    SignStats,
    TreeParams,
    TreehashStats,
    mts_keygen,
    mts_sign,
    mts_verify,
    treehash,
)
from .lattice import (
    LatticeBasis,
    LatticeKeyPair,
    LatticeSignature,
    LeakSample,
    SignMode,
    babai_round,
    basis_quality,
    collect_leak_samples,
    estimate_gram,
    gen_lattice_keys,
    is_lattice_vector,
    lattice_sign,
    lattice_verify,
    message_to_vector,
    randomized_round,
    recover_basis_moments,
)
from .keystore import (
    LatticePublicKey,
    PersistentSigner,
    StateRecord,
    StateStore,
    decode,
    encode,
)

__version__ = "0.1.0"
