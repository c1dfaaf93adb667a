"""Lattice signatures built on short/long basis pairs and Babai rounding.

A private basis of short, nearly orthogonal vectors solves the close-vector
problem well; the public basis spans the same lattice with long vectors and
can only check membership.  All lattice algebra is exact (integers and
rationals) so accept/reject decisions never hinge on float noise; floating
point appears only in the statistics of the leakage attack.
"""

from __future__ import annotations

import math
import operator
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import AttackInconclusive, DegenerateBasis, ParamError, SigningFailure
from .primitives import Hasher, _hasher, check_seed, prg_expand

MAX_DIM = 128
SALT_OCTETS = 16
DEFAULT_COORD_RANGE = 1 << 32


class SignMode(str, Enum):
    DETERMINISTIC = "det"
    RANDOMIZED = "rand"


@dataclass(frozen=True)
class LatticeBasis:
    """Square integer basis stored column-wise: ``columns[j][i]`` is entry i
    of basis vector j."""

    columns: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        d = len(self.columns)
        if d < 1:
            raise ParamError("basis needs at least one column")
        try:
            norm = tuple(tuple(operator.index(v) for v in col) for col in self.columns)
        except TypeError as exc:
            raise ParamError("basis entries must be exact integers") from exc
        if any(len(col) != d for col in norm):
            raise ParamError("basis must be square")
        object.__setattr__(self, "columns", norm)

    @property
    def dim(self) -> int:
        return len(self.columns)

    def column_norms_sq(self) -> list[int]:
        return [sum(v * v for v in col) for col in self.columns]

    def rows(self) -> list[list[int]]:
        d = self.dim
        return [[self.columns[j][i] for j in range(d)] for i in range(d)]

    def multiply_vector(self, coeffs: Sequence[int]) -> tuple[int, ...]:
        d = self.dim
        if len(coeffs) != d:
            raise ParamError("coefficient vector has wrong dimension")
        return tuple(
            sum(self.columns[j][i] * coeffs[j] for j in range(d)) for i in range(d)
        )


@dataclass
class LatticeKeyPair:
    b_priv: LatticeBasis
    b_pub: LatticeBasis
    unimodular: tuple[tuple[int, ...], ...] | None = field(default=None, compare=False)
    beta_sq: Fraction = Fraction(0)

    @property
    def dim(self) -> int:
        return self.b_priv.dim


@dataclass(frozen=True)
class LatticeSignature:
    salt: bytes
    s: tuple[int, ...]


@dataclass
class LeakSample:
    """Rounding offsets ``e = p - v_u`` harvested from released signatures."""

    samples: list[tuple[int, ...]]
    mode: SignMode


# ---------------------------------------------------------------------------
# exact linear algebra


def _bareiss_det(rows: list[list[int]]) -> int:
    """Fraction-free determinant; every intermediate stays an integer."""
    m = [row[:] for row in rows]
    d = len(m)
    sign = 1
    prev = 1
    for k in range(d - 1):
        if m[k][k] == 0:
            for r in range(k + 1, d):
                if m[r][k]:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, d):
            for j in range(k + 1, d):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[d - 1][d - 1]


@lru_cache(maxsize=256)
def _det(basis: LatticeBasis) -> int:
    return _bareiss_det(basis.rows())


def _invert_rational(rows: list[list[int]]) -> list[list[Fraction]] | None:
    d = len(rows)
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(d)]
         for i, row in enumerate(rows)]
    for col in range(d):
        pivot = next((r for r in range(col, d) if a[r][col]), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(d):
            if r != col and a[r][col]:
                factor = a[r][col]
                a[r] = [v - factor * w for v, w in zip(a[r], a[col])]
    return [row[d:] for row in a]


@lru_cache(maxsize=256)
def _inverse_scaled(basis: LatticeBasis) -> tuple[tuple[tuple[int, ...], ...], int]:
    """Return (N, D) with B^-1 = N / D exactly, D > 0.

    N is the adjugate up to sign, so its entries are integers; keeping the
    hot paths in pure integer arithmetic makes per-signature rounding cheap.
    """
    det = _det(basis)
    if det == 0:
        raise DegenerateBasis("basis is singular")
    inv = _invert_rational(basis.rows())
    scaled = []
    for row in inv:
        out = []
        for v in row:
            x = v * det
            assert x.denominator == 1
            out.append(int(x))
        scaled.append(tuple(out))
    if det < 0:
        scaled = [tuple(-v for v in row) for row in scaled]
        det = -det
    return tuple(scaled), det


def _round_half_even_div(num: int, den: int) -> int:
    """Nearest integer to num/den (den > 0), ties to even."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice < den:
        return q
    if twice > den:
        return q + 1
    return q if q % 2 == 0 else q + 1


def _scaled_coords(basis: LatticeBasis, target: Sequence) -> tuple[list, int, bool]:
    """Coordinates of ``target`` in the basis as (numerators, D, is_integer).

    Integer targets keep everything in int; rational targets fall back to
    Fraction numerators over the same denominator D.
    """
    n, d = _inverse_scaled(basis)
    dim = basis.dim
    if len(target) != dim:
        raise ParamError("target has wrong dimension")
    if all(isinstance(v, int) and not isinstance(v, bool) for v in target):
        nums = [sum(n[i][j] * target[j] for j in range(dim)) for i in range(dim)]
        return nums, d, True
    vec = [Fraction(v) for v in target]
    nums = [sum(n[i][j] * vec[j] for j in range(dim)) for i in range(dim)]
    return nums, d, False


def babai_round(basis: LatticeBasis, target: Sequence) -> tuple[int, ...]:
    """Round the exact basis coordinates of ``target`` to integers.

    With a short, near-orthogonal basis the result is a genuinely close
    lattice vector; with a long basis the same rounding step lands far away.
    Ties (coordinates at exactly one half) go to the even integer.
    """
    nums, den, is_int = _scaled_coords(basis, target)
    if is_int:
        coeffs = [_round_half_even_div(a, den) for a in nums]
    else:
        coeffs = [round(a / den) for a in nums]
    return basis.multiply_vector(coeffs)


def randomized_round(
    basis: LatticeBasis, target: Sequence, rng: random.Random
) -> tuple[int, ...]:
    """Round each coordinate up with probability equal to its fractional part.

    The rounded coordinate is unbiased, so the rounding offset no longer
    points preferentially along the private basis directions.
    """
    nums, den, _ = _scaled_coords(basis, target)
    coeffs = []
    for a in nums:
        floor = a // den
        rem = a - floor * den
        up = rem != 0 and rng.random() < rem / den
        coeffs.append(floor + (1 if up else 0))
    return basis.multiply_vector(coeffs)


def is_lattice_vector(basis: LatticeBasis, vector: Sequence[int]) -> bool:
    """Exact membership test: solve B x = v and check x is integral."""
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in vector):
        raise ParamError("membership is defined for integer vectors")
    nums, den, _ = _scaled_coords(basis, list(vector))
    return all(a % den == 0 for a in nums)


def basis_quality(basis: LatticeBasis) -> float:
    """Orthogonality defect: product of column norms over |det|, >= 1."""
    det = _det(basis)
    if det == 0:
        raise DegenerateBasis("basis is singular")
    log_defect = sum(0.5 * math.log(n) for n in basis.column_norms_sq())
    log_defect -= math.log(abs(det))
    try:
        return math.exp(log_defect)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# key generation


def _random_unimodular_mix(
    cols: list[list[int]], rng: random.Random, ops: int, coeff: int
) -> tuple[list[list[int]], list[list[int]]]:
    """Apply elementary column operations to ``cols``, tracking them in U."""
    d = len(cols)
    mixed = [list(c) for c in cols]
    u = [[int(i == j) for i in range(d)] for j in range(d)]  # columns of U
    for _ in range(ops):
        if d >= 2 and rng.random() >= 0.125:
            i, j = rng.sample(range(d), 2)
            k = rng.choice([c for c in range(-coeff, coeff + 1) if c])
            for r in range(d):
                mixed[j][r] += k * mixed[i][r]
                u[j][r] += k * u[i][r]
        else:
            j = rng.randrange(d)
            for r in range(d):
                mixed[j][r] = -mixed[j][r]
                u[j][r] = -u[j][r]
    return mixed, u


def gen_lattice_keys(
    seed: bytes,
    dim: int,
    sigma: int = 64,
    noise: int = 2,
    mix_ops: int | None = None,
    mix_coeff: int = 4,
    quality_ratio_min: float = 10.0,
    max_attempts: int = 100,
) -> LatticeKeyPair:
    """Draw a short private basis and a long public basis of the same lattice.

    The private basis is ``sigma * I`` plus small noise, hence short and well
    conditioned.  The public basis is the private one times a random
    unimodular matrix built from at least ``8 * dim`` elementary column
    operations; at dim >= 8 generation retries until the orthogonality-defect
    ratio is at least ``quality_ratio_min`` so the short/long asymmetry is
    actually measurable.  ``sigma`` defaults large enough that rounding
    offsets are finely quantized, which the leakage statistics rely on.
    """
    check_seed(seed)
    if not 1 <= dim <= MAX_DIM:
        raise ParamError(f"dimension must lie in [1, {MAX_DIM}]")
    if sigma < 1 or noise < 0:
        raise ParamError("sigma must be >= 1 and noise >= 0")
    rng = random.Random(int.from_bytes(seed, "big"))
    ops = mix_ops if mix_ops is not None else 8 * dim

    for _ in range(max_attempts):
        cols = [
            [
                (sigma if i == j else 0) + (rng.randint(-noise, noise) if noise else 0)
                for i in range(dim)
            ]
            for j in range(dim)
        ]
        priv = LatticeBasis(tuple(tuple(c) for c in cols))
        if _det(priv) == 0:
            continue
        mixed, u = _random_unimodular_mix(cols, rng, ops, mix_coeff)
        pub = LatticeBasis(tuple(tuple(c) for c in mixed))
        if dim >= 8 and basis_quality(pub) < quality_ratio_min * basis_quality(priv):
            continue
        beta_sq = Fraction(dim, 4) * max(priv.column_norms_sq())
        return LatticeKeyPair(priv, pub, tuple(tuple(c) for c in u), beta_sq)
    raise DegenerateBasis(f"no usable basis after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# signing and verification


def message_to_vector(
    digest: bytes,
    salt: bytes,
    dim: int,
    coord_range: int = DEFAULT_COORD_RANGE,
    hasher: Hasher | None = None,
) -> tuple[int, ...]:
    """Deterministically map (digest, salt) to a point in [0, coord_range)^dim."""
    if coord_range < 1:
        raise ParamError("coord_range must be positive")
    h = _hasher(hasher)
    stream_seed = h.hash(bytes(digest) + bytes(salt))
    raw = prg_expand(stream_seed, 0, 8 * dim, h)
    return tuple(
        int.from_bytes(raw[8 * i : 8 * i + 8], "big") % coord_range
        for i in range(dim)
    )


def _norm_sq(vec: Sequence[int]) -> int:
    return sum(v * v for v in vec)


def lattice_sign(
    keypair: LatticeKeyPair,
    digest: bytes,
    mode: SignMode = SignMode.DETERMINISTIC,
    rng: random.Random | None = None,
    hasher: Hasher | None = None,
    coord_range: int = DEFAULT_COORD_RANGE,
    max_retries: int = 100,
    enforce_bound: bool = True,
) -> LatticeSignature:
    """Solve the close-vector problem for the salted message point.

    Retries with a fresh salt whenever the offset exceeds the published
    bound; ``enforce_bound=False`` exists for experiments that want to watch
    the raw offsets (for example signing with the wrong basis).
    """
    rng = rng if rng is not None else random.Random()
    mode = SignMode(mode)
    dim = keypair.dim
    for _ in range(max_retries):
        salt = rng.randbytes(SALT_OCTETS)
        v_u = message_to_vector(digest, salt, dim, coord_range, hasher)
        if mode is SignMode.DETERMINISTIC:
            p = babai_round(keypair.b_priv, v_u)
        else:
            p = randomized_round(keypair.b_priv, v_u, rng)
        s = tuple(a - b for a, b in zip(p, v_u))
        if not enforce_bound or _norm_sq(s) <= keypair.beta_sq:
            return LatticeSignature(salt, s)
    raise SigningFailure(f"bound not met after {max_retries} salts; beta mis-sized?")


def lattice_verify_reason(
    b_pub: LatticeBasis,
    digest: bytes,
    sig: LatticeSignature,
    beta_sq: Fraction,
    hasher: Hasher | None = None,
    coord_range: int = DEFAULT_COORD_RANGE,
) -> tuple[bool, str]:
    """Like :func:`lattice_verify` but names the first failed check."""
    if len(sig.salt) != SALT_OCTETS:
        raise ParamError(f"salt must be {SALT_OCTETS} octets")
    if len(sig.s) != b_pub.dim:
        raise ParamError("signature offset has wrong dimension")
    if _norm_sq(sig.s) > beta_sq:
        return False, "size"
    v_u = message_to_vector(digest, sig.salt, b_pub.dim, coord_range, hasher)
    candidate = tuple(a + b for a, b in zip(v_u, sig.s))
    if not is_lattice_vector(b_pub, candidate):
        return False, "membership"
    return True, ""


def lattice_verify(
    b_pub: LatticeBasis,
    digest: bytes,
    sig: LatticeSignature,
    beta_sq: Fraction,
    hasher: Hasher | None = None,
    coord_range: int = DEFAULT_COORD_RANGE,
) -> bool:
    """Accept iff the offset is small and lands the message point on the lattice."""
    ok, _ = lattice_verify_reason(b_pub, digest, sig, beta_sq, hasher, coord_range)
    return ok


# ---------------------------------------------------------------------------
# leakage attack


def collect_leak_samples(
    keypair: LatticeKeyPair,
    count: int,
    mode: SignMode = SignMode.DETERMINISTIC,
    rng: random.Random | None = None,
    hasher: Hasher | None = None,
) -> LeakSample:
    """Sign ``count`` random digests and keep the rounding offsets.

    Deterministic rounding confines every offset to the fundamental
    parallelepiped of the private basis, which is exactly what the moment
    attack exploits.  Offsets are recorded straight from the rounding step
    (no acceptance-bound retry), so the collected statistics are those of
    the rounding itself; the signer's bound is sized for deterministic
    outputs and would otherwise truncate the wider randomized ones.
    """
    if count < 1:
        raise ParamError("sample count must be at least 1")
    rng = rng if rng is not None else random.Random()
    mode = SignMode(mode)
    samples = []
    for _ in range(count):
        digest = rng.randbytes(32)
        sig = lattice_sign(keypair, digest, mode, rng, hasher, enforce_bound=False)
        samples.append(sig.s)
    return LeakSample(samples, mode)


def estimate_gram(samples: LeakSample | Sequence[Sequence[int]]) -> np.ndarray:
    """12x the empirical second moment of the offsets.

    For deterministic rounding with finely quantized offsets this converges
    to B_priv B_priv^T; randomized rounding doubles it.
    """
    data = samples.samples if isinstance(samples, LeakSample) else samples
    if len(data) < 2:
        raise ParamError("need at least 2 samples")
    arr = np.asarray(data, dtype=float)
    return 12.0 * (arr.T @ arr) / len(data)


def _fourth_moment_directions(
    whitened: np.ndarray,
    restarts: int,
    iters: int,
    lr: float,
    rng: np.random.Generator,
) -> list[tuple[np.ndarray, float]]:
    # all restarts advance together as rows of U; one batched pass per step
    n, dim = whitened.shape
    u = rng.normal(size=(restarts, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    for _ in range(iters):
        proj = whitened @ u.T
        cubed = proj * proj * proj
        grad = 4.0 * cubed.T @ whitened / n
        grad -= np.sum(grad * u, axis=1, keepdims=True) * u
        u = u - lr * grad
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    proj = whitened @ u.T
    sq = proj * proj
    m4 = np.mean(sq * sq, axis=0)
    return [(u[i], float(m4[i])) for i in range(restarts)]


def recover_basis_moments(
    samples: LeakSample | Sequence[Sequence[int]],
    true_basis: LatticeBasis,
    restarts: int = 20,
    iters: int = 300,
    lr: float = 0.1,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Learn the private basis columns from deterministic rounding offsets.

    The offsets are whitened by the estimated Gram matrix, which turns the
    private parallelepiped into a rotated cube; minimizing the fourth moment
    of projections over the unit sphere by projected gradient descent then
    finds the cube axes.  Candidate directions are mapped back through the
    whitening and greedily matched to +-columns of ``true_basis``.

    Returns the recovered columns (ordered and sign-aligned to the true
    basis) and the largest relative column error.  Raises
    :class:`AttackInconclusive` when the restarts do not yield ``dim``
    distinct directions.
    """
    data = samples.samples if isinstance(samples, LeakSample) else samples
    dim = true_basis.dim
    if dim > 4:
        raise ParamError("moment recovery is supported for dim <= 4")
    if len(data) < 10 * dim:
        raise ParamError("too few samples for moment recovery")
    arr = np.asarray(data, dtype=float)

    gram = 12.0 * (arr.T @ arr) / len(arr)
    eigvals, eigvecs = np.linalg.eigh(gram)
    if np.min(eigvals) <= 0:
        raise AttackInconclusive("estimated Gram matrix is not positive definite")
    whiten = eigvecs @ np.diag(eigvals**-0.5) @ eigvecs.T
    unwhiten = eigvecs @ np.diag(eigvals**0.5) @ eigvecs.T
    scaled = arr @ whiten.T * math.sqrt(12.0)

    rng = np.random.default_rng(seed)
    candidates = _fourth_moment_directions(scaled, restarts, iters, lr, rng)
    candidates.sort(key=lambda item: item[1])

    distinct: list[np.ndarray] = []
    for u, _ in candidates:
        if all(abs(float(u @ v)) < 0.9 for v in distinct):
            distinct.append(u)
        if len(distinct) == dim:
            break
    if len(distinct) < dim:
        raise AttackInconclusive(
            f"found {len(distinct)} of {dim} directions after {restarts} restarts"
        )

    recovered = [unwhiten @ u for u in distinct]
    true_cols = [np.array(col, dtype=float) for col in true_basis.columns]

    ordered = np.zeros((dim, dim))
    residual = 0.0
    unused = list(range(len(recovered)))
    for j, col in enumerate(true_cols):
        scale = np.linalg.norm(col)
        best = min(
            ((i, sgn) for i in unused for sgn in (1.0, -1.0)),
            key=lambda item: np.linalg.norm(item[1] * recovered[item[0]] - col),
        )
        i, sgn = best
        unused.remove(i)
        ordered[:, j] = sgn * recovered[i]
        residual = max(residual, float(np.linalg.norm(ordered[:, j] - col) / scale))
    return ordered, residual
