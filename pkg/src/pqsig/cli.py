"""Command-line front end.

Exit codes: 0 success (verify: accepted), 1 rejected signature, 2 error.
The environment variable PQSIG_SEED overrides the rng seed everywhere it
is used, which makes keygen, bench, and attack runs reproducible.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import random
import sys
from pathlib import Path

from . import bench, keystore
from .errors import AttackInconclusive, PqsigError
from .keystore import LatticePublicKey, PersistentSigner, StateRecord, StateStore
from .lattice import (
    LatticeKeyPair,
    LatticeSignature,
    SignMode,
    collect_leak_samples,
    estimate_gram,
    gen_lattice_keys,
    lattice_sign,
    lattice_verify,
    recover_basis_moments,
)
from .merkle import MtsPublicKey, MtsSignature, TreeParams, mts_keygen, mts_verify
from .ots import OtsKind, OtsParams, OtsPrivateKey, OtsPublicKey, OtsSignature, ots_sign, ots_verify, ots_gen
from .primitives import Hasher

OTS_SCHEMES = {"lamport", "lamport-zeros", "winternitz"}


def _env_seed() -> int | None:
    raw = os.environ.get("PQSIG_SEED")
    return int(raw) if raw else None


def _seed_bytes(explicit: str | None) -> bytes:
    if explicit:
        return bytes.fromhex(explicit)
    env = _env_seed()
    if env is not None:
        return hashlib.sha256(str(env).encode()).digest()[:16]
    return os.urandom(16)


def _parse_params(pairs: list[str]) -> dict[str, int]:
    out = {}
    for pair in pairs:
        key, _, val = pair.partition("=")
        if not val:
            raise PqsigError(f"bad parameter '{pair}', expected key=value")
        out[key] = int(val)
    return out


def _digest_file(path: str, hasher: Hasher) -> bytes:
    return hasher.hash(Path(path).read_bytes())


def cmd_keygen(args) -> int:
    seed = _seed_bytes(args.seed)
    params = _parse_params(args.params or [])
    out = Path(args.out)
    hasher = Hasher()

    if args.scheme in OTS_SCHEMES:
        ots_params = OtsParams(
            OtsKind(args.scheme), params.get("n", 256), params.get("b", 16)
        )
        sk, pk = ots_gen(seed, params.get("index", 0), ots_params, hasher)
        out.with_suffix(".key").write_bytes(keystore.encode(sk))
        out.with_suffix(".pub").write_bytes(keystore.encode(pk))
        print(f"wrote {out.with_suffix('.key')} and {out.with_suffix('.pub')}")
    elif args.scheme == "merkle":
        ots_params = OtsParams(
            OtsKind.WINTERNITZ, params.get("n", 256), params.get("b", 16)
        )
        tree = TreeParams(params.get("m", 4), ots_params)
        cache = params.get("k", tree.height)
        pub, state = mts_keygen(seed, tree, cache, hasher)
        out.with_suffix(".pub").write_bytes(keystore.encode(pub))
        StateStore(out.with_suffix(".state")).commit(state)
        print(
            f"wrote {out.with_suffix('.pub')} and {out.with_suffix('.state')} "
            f"({tree.leaf_count} signatures available)"
        )
    elif args.scheme == "lattice":
        kp = gen_lattice_keys(seed, params.get("d", 8))
        out.with_suffix(".key").write_bytes(keystore.encode(kp))
        out.with_suffix(".pub").write_bytes(
            keystore.encode(LatticePublicKey(kp.b_pub, kp.beta_sq))
        )
        print(f"wrote {out.with_suffix('.key')} and {out.with_suffix('.pub')}")
    else:
        raise PqsigError(f"unknown scheme '{args.scheme}'")
    return 0


def cmd_sign(args) -> int:
    hasher = Hasher()
    digest = _digest_file(args.infile, hasher)
    base = Path(args.key)

    state_path = base.with_suffix(".state")
    key_path = base.with_suffix(".key")
    if state_path.exists():
        signer = PersistentSigner(StateStore(state_path), hasher)
        sig = signer.sign(digest)
    elif key_path.exists():
        obj = keystore.decode(key_path.read_bytes())
        if isinstance(obj, OtsPrivateKey):
            sig = ots_sign(obj, digest, hasher)
            # consume the key on disk before the signature leaves this process
            tmp = key_path.with_name(key_path.name + ".tmp")
            tmp.write_bytes(keystore.encode(obj))
            os.replace(tmp, key_path)
        elif isinstance(obj, LatticeKeyPair):
            rng = random.Random(_env_seed())
            sig = lattice_sign(obj, digest, SignMode.DETERMINISTIC, rng, hasher)
        else:
            raise PqsigError("key file does not hold a private key")
    else:
        raise PqsigError(f"no key material at {base}.state or {base}.key")

    Path(args.out).write_bytes(keystore.encode(sig))
    print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    hasher = Hasher()
    digest = _digest_file(args.infile, hasher)
    pub = keystore.decode(Path(args.pub).with_suffix(".pub").read_bytes())
    sig = keystore.decode(Path(args.sig).read_bytes())

    if isinstance(pub, OtsPublicKey) and isinstance(sig, OtsSignature):
        ok = ots_verify(pub, digest, sig, hasher)
    elif isinstance(pub, MtsPublicKey) and isinstance(sig, MtsSignature):
        ok = mts_verify(pub, digest, sig, hasher)
    elif isinstance(pub, LatticePublicKey) and isinstance(sig, LatticeSignature):
        ok = lattice_verify(pub.basis, digest, sig, pub.beta_sq, hasher)
    else:
        raise PqsigError("public key and signature schemes do not match")

    print("accepted" if ok else "rejected")
    return 0 if ok else 1


def cmd_bench(args) -> int:
    config = bench.load_config(args.config)
    if args.format:
        config.fmt = args.format
    if args.out:
        config.out = args.out
    env = _env_seed()
    if env is not None:
        config.seed = env
    report = bench.run_benchmark(config)
    path = bench.emit_report(report, config.fmt, config.out)
    print(f"wrote {path} ({len(report.rows)} rows)")
    for scheme, params, err in report.failures:
        print(f"failed: {scheme} {params}: {err}", file=sys.stderr)
    return 0


def cmd_attack(args) -> int:
    seed = _env_seed()
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        seed = 0
    seed_bytes = hashlib.sha256(f"attack:{seed}".encode()).digest()[:16]
    rng = random.Random(seed)
    mode = SignMode(args.mode)
    kp = gen_lattice_keys(seed_bytes, args.dim)
    samples = collect_leak_samples(kp, args.samples, mode, rng)
    gram = estimate_gram(samples)
    print(f"collected {args.samples} offsets in mode {mode.value} at d={args.dim}")
    print("12 x second moment:")
    for row in gram:
        print("  " + " ".join(f"{v:10.2f}" for v in row))
    if args.dim > 4:
        print("moment recovery supports d <= 4; gram estimate only")
        return 0
    try:
        _, residual = recover_basis_moments(samples, kp.b_priv, seed=seed)
    except AttackInconclusive as exc:
        print(f"attack inconclusive: {exc}")
        return 0
    print(f"max relative column error: {residual:.4f}")
    if mode is SignMode.DETERMINISTIC:
        print("deterministic rounding leaks the private basis shape")
    else:
        print("randomized rounding: residual reported without a pass/fail gate")
    return 0


def cmd_claims(args) -> int:
    env = _env_seed()
    report = bench.claims_report(seed=env if env is not None else 1)
    results = bench.verify_scaling_claims(report)
    all_ok = True
    lines = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        all_ok = all_ok and res.passed
        line = f"{status} {res.name}: {res.measured}"
        lines.append(line)
        print(line)
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.report}")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqsig")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key pair")
    p.add_argument("--scheme", required=True,
                   choices=sorted(OTS_SCHEMES) + ["merkle", "lattice"])
    p.add_argument("--out", required=True, help="base path for .key/.pub/.state")
    p.add_argument("--params", nargs="*", help="key=value pairs (n, b, m, k, d)")
    p.add_argument("--seed", help="hex seed (>=16 octets) for deterministic keys")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("sign", help="sign a file's digest")
    p.add_argument("--key", required=True, help="base path from keygen --out")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sign)

    p = sub.add_parser("verify", help="verify a signature (exit 0/1/2)")
    p.add_argument("--pub", required=True, help="base path from keygen --out")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--sig", required=True)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="run the benchmark grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=["csv", "md"])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("attack", help="run the private-basis leakage attack")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--mode", choices=["det", "rand"], default="det")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("claims", help="measure and check the scaling claims")
    p.add_argument("--report", help="write the pass/fail lines to this path")
    p.set_defaults(fn=cmd_claims)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PqsigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
