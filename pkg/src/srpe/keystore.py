"""File-based keystore with one directory per party.

::

    public/   params.srpe, pp.srpe                    readable by everyone
    kgc/      msk.srpe (secret), state.txt, nodes/    KGC only
    users/<id>/sk.srpe (secret)                       one recipient each
    server/   tokens/, uk/, tk/                       public material the server holds

Identities appear in paths hex-encoded.  Secret files are written with mode
0600 and carry the secret flag in their header; the server-side reader
refuses them.
"""

from __future__ import annotations

import contextlib
import fcntl
import os
from pathlib import Path

from . import wire
from .cs_method import BinaryTreeState, RevocationList, dump_state, load_state


class KeystoreError(RuntimeError):
    pass


class SecrecyViolation(KeystoreError):
    pass


class Keystore:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    # paths -----------------------------------------------------------------

    @property
    def params_path(self) -> Path:
        return self.root / "public" / "params.srpe"

    @property
    def pp_path(self) -> Path:
        return self.root / "public" / "pp.srpe"

    @property
    def msk_path(self) -> Path:
        return self.root / "kgc" / "msk.srpe"

    @property
    def state_path(self) -> Path:
        return self.root / "kgc" / "state.txt"

    def node_path(self, node: int) -> Path:
        return self.root / "kgc" / "nodes" / f"node-{node}.srpe"

    def sk_path(self, identity: bytes) -> Path:
        return self.root / "users" / identity.hex() / "sk.srpe"

    def token_path(self, identity: bytes) -> Path:
        return self.root / "server" / "tokens" / f"{identity.hex()}.srpe"

    def uk_path(self, epoch: int) -> Path:
        return self.root / "server" / "uk" / f"epoch-{epoch}.srpe"

    def tk_path(self, identity: bytes, epoch: int) -> Path:
        return self.root / "server" / "tk" / f"{identity.hex()}-epoch-{epoch}.srpe"

    # raw io ------------------------------------------------------------------

    @staticmethod
    def write(path: Path | str, data: bytes, secret: bool = False) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600 if secret else 0o644)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)

    @staticmethod
    def read(path: Path | str, expect: wire.Tag | None = None, allow_secret: bool = True) -> bytes:
        path = Path(path)
        if not path.exists():
            raise KeystoreError(f"missing file {path}")
        data = path.read_bytes()
        tag, secret = wire.peek(data)
        if secret and not allow_secret:
            raise SecrecyViolation(f"refusing to read secret material from {path}")
        if expect is not None and tag != expect:
            raise KeystoreError(f"{path} holds {tag.name}, expected {expect.name}")
        return data

    def load(self, path: Path, expect: wire.Tag | None = None, allow_secret: bool = True):
        return wire.load(self.read(path, expect, allow_secret))

    def store(self, path: Path, obj, q: int | None = None) -> None:
        data = wire.dump(obj, q)
        self.write(path, data, secret=wire.peek(data)[1])

    # tree state ------------------------------------------------------------

    @contextlib.contextmanager
    def locked(self):
        """Advisory exclusive lock for KGC writers."""
        lock = self.root / "kgc" / "state.lock"
        lock.parent.mkdir(parents=True, exist_ok=True)
        with open(lock, "a") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def load_state(self) -> tuple[BinaryTreeState, RevocationList]:
        state, rl, refs = load_state(self.state_path.read_text())
        for node, ref in refs.items():
            state.node_store[node] = self.load(self.state_path.parent / ref, wire.Tag.NODE)
        return state, rl

    def save_state(self, state: BinaryTreeState, rl: RevocationList) -> None:
        refs = {}
        for node, mat in state.node_store.items():
            path = self.node_path(node)
            refs[node] = str(path.relative_to(self.state_path.parent))
            if not path.exists():  # node matrices are write-once
                self.store(path, mat)
        self.write(self.state_path, dump_state(state, rl, refs).encode())

