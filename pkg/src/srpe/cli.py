"""Command-line workflow for the four parties.

Every subcommand runs one algorithm and writes one object.  Exit codes:
0 success, 2 when the answer is the failure symbol (revoked user at
``server-trankg``, undecryptable ciphertext at ``user-decrypt``), 1 on any
error.  With ``SRPE_SEED`` (hex) set, every command draws from a stream
derived from the seed and its own arguments, so a scripted run replays
byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import zlib

import numpy as np

from . import params as params_mod
from . import scheme, wire
from .gauss import SEED_ENV
from .keystore import Keystore, KeystoreError
from .scheme import Epoch

EXIT_OK, EXIT_ERROR, EXIT_BOTTOM = 0, 1, 2

log = logging.getLogger("srpe")


class CliError(RuntimeError):
    pass


def command_rng(args, *context) -> np.random.Generator:
    """Seeded per-command stream under SRPE_SEED, OS entropy otherwise."""
    seed = os.environ.get(SEED_ENV)
    if not seed:
        return np.random.default_rng()
    key = "\x00".join([args.command, *map(str, context)]).encode()
    return np.random.default_rng(np.random.SeedSequence(int(seed, 16), spawn_key=(zlib.crc32(key),)))


def parse_vector(text: str, ell: int) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"cannot parse integer vector {text!r}") from None
    if len(vals) != ell:
        raise CliError(f"expected {ell} comma-separated integers, got {len(vals)}")
    return vals


def parse_bits(text: str) -> list[int]:
    if not text or set(text) - {"0", "1"}:
        raise CliError(f"message must be a non-empty string of 0/1, got {text!r}")
    return [int(c) for c in text]


def _ident(args) -> bytes:
    if not args.id:
        raise CliError("--id is required")
    return args.id.encode()


def _epoch(args) -> Epoch:
    if args.epoch is None:
        raise CliError("--epoch is required")
    return Epoch.of(args.epoch, args.time_label)


def _public(ks: Keystore, allow_secret=True):
    P = ks.load(ks.params_path, wire.Tag.PARAMS, allow_secret)
    pp = ks.load(ks.pp_path, wire.Tag.PP, allow_secret)
    return P, pp


# ---------------------------------------------------------------------------
# KGC

def cmd_kgc_sys(args, ks: Keystore) -> int:
    if args.profile == "custom":
        custom = dict(n=args.n, N=args.users, ell=args.ell, kappa=args.kappa, q=args.q)
        missing = [k for k, v in custom.items() if v is None]
        if missing:
            raise CliError(f"custom profile needs --{' --'.join(missing)}")
        P = params_mod.sys("custom", **custom)
    else:
        P = params_mod.sys(args.profile)
    ks.store(ks.params_path, P)
    print(f"params: profile={P.profile_name} n={P.n} N={P.N} ell={P.ell} kappa={P.kappa} "
          f"q={P.q} m={P.m} s={P.s} B={P.B}")
    print(P.banner)
    return EXIT_OK


def cmd_kgc_setup(args, ks: Keystore) -> int:
    P = ks.load(ks.params_path, wire.Tag.PARAMS)
    if ks.msk_path.exists():
        if not args.force:
            raise CliError("keystore already set up (use --force to start over)")
        for sub in ("kgc/nodes", "server", "users"):
            shutil.rmtree(ks.root / sub, ignore_errors=True)
    with ks.locked():
        pp, msk, rl, state = scheme.setup(P, command_rng(args))
        ks.store(ks.pp_path, pp)
        ks.store(ks.msk_path, msk)
        ks.save_state(state, rl)
    print(f"setup: tree with {state.num_leaves} leaves, pp {ks.pp_path.stat().st_size} bytes")
    return EXIT_OK


def _kgc_material(ks: Keystore):
    P, pp = _public(ks)
    msk = ks.load(ks.msk_path, wire.Tag.MSK)
    return P, pp, msk


def cmd_kgc_userkg(args, ks: Keystore) -> int:
    P, pp, msk = _kgc_material(ks)
    ident = _ident(args)
    x = parse_vector(args.predicate or "", P.ell)
    sk = scheme.user_kg(P, pp, msk, ident, x, command_rng(args, args.id, args.predicate))
    out = args.out or ks.sk_path(ident)
    ks.store(out, sk, P.q)
    print(f"secret key for {args.id} -> {out}")
    return EXIT_OK


def cmd_kgc_token(args, ks: Keystore) -> int:
    P, pp, msk = _kgc_material(ks)
    ident = _ident(args)
    x = parse_vector(args.predicate or "", P.ell)
    with ks.locked():
        state, rl = ks.load_state()
        tok = scheme.token(P, pp, msk, ident, x, state, command_rng(args, args.id, args.predicate))
        ks.save_state(state, rl)
    out = args.out or ks.token_path(ident)
    ks.store(out, tok, P.q)
    print(f"token for {args.id}: leaf {state.leaf_of(ident)}, nodes {sorted(tok.entries)} -> {out}")
    return EXIT_OK


def cmd_kgc_updkg(args, ks: Keystore) -> int:
    P, pp, msk = _kgc_material(ks)
    ep = _epoch(args)
    with ks.locked():
        state, rl = ks.load_state()
        uk = scheme.upd_kg(P, pp, msk, ep, rl, state, command_rng(args, ep.counter, ep.label.hex()))
        ks.save_state(state, rl)
    out = args.out or ks.uk_path(ep.counter)
    ks.store(out, uk, P.q)
    print(f"update key for epoch {ep.counter}: cover {sorted(uk.entries)} -> {out}")
    return EXIT_OK


def cmd_kgc_revoke(args, ks: Keystore) -> int:
    ident = _ident(args)
    if args.epoch is None:
        raise CliError("--epoch is required")
    with ks.locked():
        state, rl = ks.load_state()
        scheme.revoke(state, rl, ident, args.epoch)
        ks.save_state(state, rl)
    print(f"revoked {args.id} (leaf {state.leaf_of(ident)}) from epoch {args.epoch}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# server: public material only

def cmd_server_trankg(args, ks: Keystore) -> int:
    ident = _ident(args)
    if args.epoch is None:
        raise CliError("--epoch is required")
    P, _ = _public(ks, allow_secret=False)
    tok = ks.load(args.token or ks.token_path(ident), wire.Tag.TOKEN, allow_secret=False)
    uk = ks.load(args.uk or ks.uk_path(args.epoch), wire.Tag.UK, allow_secret=False)
    tk = scheme.tran_kg(tok, uk)
    if tk is None:
        print(f"{args.id} is revoked at epoch {args.epoch}: no transform key")
        return EXIT_BOTTOM
    out = args.out or ks.tk_path(ident, uk.epoch.counter)
    ks.store(out, tk, P.q)
    print(f"transform key for {args.id} at epoch {args.epoch} (node {tk.node}) -> {out}")
    return EXIT_OK


def cmd_server_transform(args, ks: Keystore) -> int:
    ident = _ident(args)
    if not args.inp or not args.out:
        raise CliError("--in and --out are required")
    P, _ = _public(ks, allow_secret=False)
    cts = wire.load_batch(ks.read(args.inp, wire.Tag.CT, allow_secret=False))
    ep = cts[0].epoch
    tk = ks.load(args.tk or ks.tk_path(ident, ep.counter), wire.Tag.TK, allow_secret=False)
    pcts = [scheme.transform(P, ct, tk) for ct in cts]
    ks.write(args.out, wire.dump_batch(pcts))
    print(f"partial ciphertext ({len(pcts)} bit(s)) for {args.id} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sender and recipient

def cmd_send_encrypt(args, ks: Keystore) -> int:
    if not args.out:
        raise CliError("--out is required")
    P, pp = _public(ks, allow_secret=False)
    y = parse_vector(args.attribute or "", P.ell)
    ep = _epoch(args)
    bits = parse_bits(args.message or "")
    rng = command_rng(args, args.attribute, ep.counter, ep.label.hex(), args.message)
    cts = [scheme.enc(P, pp, y, ep, b, rng) for b in bits]
    ks.write(args.out, wire.dump_batch(cts))
    print(f"ciphertext ({len(bits)} bit(s)) for epoch {ep.counter} -> {args.out}")
    return EXIT_OK


def cmd_user_decrypt(args, ks: Keystore) -> int:
    ident = _ident(args)
    if not args.inp:
        raise CliError("--in is required")
    P = ks.load(ks.params_path, wire.Tag.PARAMS)
    sk = ks.load(args.sk or ks.sk_path(ident), wire.Tag.SK)
    pcts = wire.load_batch(ks.read(args.inp, wire.Tag.PCT))
    bits = [scheme.dec(P, pct, sk) for pct in pcts]
    if any(b is None for b in bits):
        print("undecryptable")
        return EXIT_BOTTOM
    text = "".join(map(str, bits))
    if args.out:
        ks.write(args.out, text.encode() + b"\n")
    print(text)
    return EXIT_OK


COMMANDS = {
    "kgc-sys": (cmd_kgc_sys, "choose concrete parameters"),
    "kgc-setup": (cmd_kgc_setup, "generate public parameters and the master secret"),
    "kgc-userkg": (cmd_kgc_userkg, "issue a user's long-term secret key"),
    "kgc-token": (cmd_kgc_token, "issue a user's token to the server"),
    "kgc-updkg": (cmd_kgc_updkg, "publish the update key for an epoch"),
    "kgc-revoke": (cmd_kgc_revoke, "revoke a user from an epoch on"),
    "server-trankg": (cmd_server_trankg, "derive a transform key (exit 2 if revoked)"),
    "server-transform": (cmd_server_transform, "partially decrypt a ciphertext for a user"),
    "send-encrypt": (cmd_send_encrypt, "encrypt a bit string under an attribute and epoch"),
    "user-decrypt": (cmd_user_decrypt, "finish decryption (exit 2 if undecryptable)"),
}


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 so that 2 keeps meaning "failure symbol"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="srpe", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--keystore", type=os.path.abspath,
                    default=os.environ.get("SRPE_KEYSTORE"), help="keystore directory")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--keystore", type=os.path.abspath, default=argparse.SUPPRESS,
                       help="keystore directory (may also precede the subcommand)")
        if name == "kgc-sys":
            p.add_argument("--profile", default="toy", choices=params_mod.profile_names())
            p.add_argument("--n", type=int)
            p.add_argument("--users", type=int, help="N, number of users (custom profile)")
            p.add_argument("--ell", type=int)
            p.add_argument("--kappa", type=int)
            p.add_argument("--q", type=int)
        if name == "kgc-setup":
            p.add_argument("--force", action="store_true")
        if name not in ("kgc-sys", "kgc-setup"):
            p.add_argument("--id")
            p.add_argument("--epoch", type=int)
            p.add_argument("--time-label")
            p.add_argument("--predicate", help="x1,...,x_ell")
            p.add_argument("--attribute", help="y1,...,y_ell")
            p.add_argument("--message", help="bit string, e.g. 1011")
            p.add_argument("--in", dest="inp", type=os.path.abspath)
            p.add_argument("--out", type=os.path.abspath)
            p.add_argument("--sk", type=os.path.abspath, help="secret key file (default: keystore)")
            p.add_argument("--token", type=os.path.abspath)
            p.add_argument("--uk", type=os.path.abspath)
            p.add_argument("--tk", type=os.path.abspath)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not args.keystore:
        ap.error("--keystore (or SRPE_KEYSTORE) is required")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    ks = Keystore(args.keystore)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args, ks)
    except (CliError, KeystoreError, wire.WireError, scheme.EpochMismatch, ValueError) as exc:
        print(f"srpe: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
