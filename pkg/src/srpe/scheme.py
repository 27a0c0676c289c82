"""Inner-product predicate encryption with revocation handled by an untrusted server.

Parties:

* KGC: ``setup``, ``user_kg``, ``token``, ``upd_kg``, ``revoke``.
* server: ``tran_kg`` and ``transform`` (public material only).
* sender: ``enc``.
* recipient: ``dec`` with its long-term secret key.

The server combines a user's token (one matrix per node on the user's
path) with the epoch's update key (one matrix per cover node) into a
transform key ``(Z1, Z2)`` with ``[A|A_x] Z1 + [A|C_t] Z2 = D_id``, and uses
it to fold the A-side of a ciphertext into a single length-m vector
``cbar``.  The recipient finishes with its key ``Z``,
``[B|B_x|D_id] Z = V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .afv_pe import (
    EncTrace,
    attribute_vector,
    combine_matrices,
    combine_vectors,
    draw_noise,
    lwe_sample,
    random_signs,
)
from .cs_method import BinaryTreeState, RevocationList, path, served_nodes
from .gauss import int_matmul
from .params import SysParams, encode_id_time
from .trapdoor import GTrapdoor, sample_left, trap_gen
from .zq_linalg import (
    DimensionError,
    ZqMatrix,
    ZqVector,
    concat_cols,
    concat_vectors,
    encode_message,
    frd_map,
    gadget_matrix,
    mat_mul,
    round_decode,
)


class EpochMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Epoch:
    """A time period: an ordering counter plus the label that gets encoded into C_t."""

    counter: int
    label: bytes

    @classmethod
    def of(cls, counter: int, label: bytes | str | None = None) -> "Epoch":
        if label is None:
            label = f"epoch-{counter}"
        if isinstance(label, str):
            label = label.encode()
        return cls(int(counter), bytes(label))


@dataclass(frozen=True)
class SrpePublicParams:
    A: ZqMatrix
    B: ZqMatrix
    C: ZqMatrix
    D: ZqMatrix
    A_i: tuple[ZqMatrix, ...]
    B_i: tuple[ZqMatrix, ...]
    V: ZqMatrix

    @property
    def q(self) -> int:
        return self.A.q

    def matrices(self) -> list[ZqMatrix]:
        return [self.A, self.B, self.C, self.D, *self.A_i, *self.B_i, self.V]


@dataclass(frozen=True)
class MasterSecret:
    T_A: GTrapdoor
    T_B: GTrapdoor


@dataclass(frozen=True)
class UserSecretKey:
    identity: bytes
    x: np.ndarray
    Z: np.ndarray  # 3m x kappa


@dataclass(frozen=True)
class TokenSet:
    identity: bytes
    x: np.ndarray
    entries: dict[int, np.ndarray]  # node -> Z1 (2m x m)


@dataclass(frozen=True)
class UpdateKey:
    epoch: Epoch
    entries: dict[int, np.ndarray]  # node -> Z2 (2m x m)


@dataclass(frozen=True)
class TransformKey:
    identity: bytes
    x: np.ndarray
    epoch: Epoch
    node: int
    Z1: np.ndarray
    Z2: np.ndarray


@dataclass(frozen=True)
class Ciphertext:
    epoch: Epoch
    c: ZqVector
    c1: ZqVector
    c1_i: tuple[ZqVector, ...]
    c10: ZqVector
    c2: ZqVector
    c2_i: tuple[ZqVector, ...]

    @property
    def size(self) -> int:
        parts = [self.c, self.c1, *self.c1_i, self.c10, self.c2, *self.c2_i]
        return sum(len(p) for p in parts)


@dataclass(frozen=True)
class PartialCiphertext:
    epoch: Epoch
    c: ZqVector
    c2: ZqVector
    c2_i: tuple[ZqVector, ...]
    cbar: ZqVector  # length m

    @property
    def size(self) -> int:
        return len(self.c) + len(self.c2) + sum(len(v) for v in self.c2_i) + len(self.cbar)


@dataclass
class SrpeTrace(EncTrace):
    """All encryption randomness (white-box tests)."""

    e2: np.ndarray | None = None
    S_i: list | None = None
    R_bar: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _ident(identity) -> bytes:
    return identity.encode() if isinstance(identity, str) else bytes(identity)


def _tagged(params: SysParams, base: ZqMatrix, label: bytes) -> ZqMatrix:
    """``base + H(label) G`` for an identity or time label."""
    v = encode_id_time(label, params.n, params.q)
    h = frd_map(v, params.frd_poly)
    return base + mat_mul(h, gadget_matrix(params.n, params.m, params.q))


def identity_matrix(params: SysParams, pp: SrpePublicParams, identity) -> ZqMatrix:
    """``D_id = D + H(id) G``."""
    return _tagged(params, pp.D, _ident(identity))


def epoch_matrix(params: SysParams, pp: SrpePublicParams, epoch: Epoch) -> ZqMatrix:
    """``C_t = C + H(t) G``."""
    return _tagged(params, pp.C, epoch.label)


# ---------------------------------------------------------------------------
# KGC

def setup(params: SysParams, rng: np.random.Generator):
    """Public parameters, master secret, empty revocation list and fresh tree."""
    n, m, q, ell = params.n, params.m, params.q, params.ell
    T_A = trap_gen(n, q, m, rng)
    T_B = trap_gen(n, q, m, rng)
    C = ZqMatrix.uniform(n, m, q, rng)
    D = ZqMatrix.uniform(n, m, q, rng)
    A_i = tuple(ZqMatrix.uniform(n, m, q, rng) for _ in range(ell))
    B_i = tuple(ZqMatrix.uniform(n, m, q, rng) for _ in range(ell))
    V = ZqMatrix.uniform(n, params.kappa, q, rng)
    pp = SrpePublicParams(T_A.A, T_B.A, C, D, A_i, B_i, V)
    return pp, MasterSecret(T_A, T_B), RevocationList(), BinaryTreeState.for_users(params.N)


def user_kg(params: SysParams, pp: SrpePublicParams, msk: MasterSecret, identity, x,
            rng: np.random.Generator) -> UserSecretKey:
    """Long-term key ``Z`` (3m x kappa) with ``[B | B_x | D_id] Z = V``."""
    identity = _ident(identity)
    x = attribute_vector(x, params.ell, params.q)
    right = concat_cols([combine_matrices(pp.B_i, x), identity_matrix(params, pp, identity)])
    Z = sample_left(pp.B, right, msk.T_B, pp.V, params.s, rng)
    return UserSecretKey(identity, x, Z)


def _draw_node(params: SysParams, rng: np.random.Generator):
    return lambda: ZqMatrix.uniform(params.n, params.m, params.q, rng)


def _split(Z: np.ndarray, nodes, width: int) -> dict[int, np.ndarray]:
    return {node: np.ascontiguousarray(Z[:, j * width:(j + 1) * width]) for j, node in enumerate(nodes)}


def token(params: SysParams, pp: SrpePublicParams, msk: MasterSecret, identity, x,
          state: BinaryTreeState, rng: np.random.Generator) -> TokenSet:
    """One ``Z1`` per node on the user's path, ``[A | A_x] Z1 = D_id - U_theta``.

    Registers the identity on first use and draws missing ``U_theta``;
    ``state`` is updated in place.
    """
    identity = _ident(identity)
    x = attribute_vector(x, params.ell, params.q)
    leaf = state.leaf_or_assign(identity)
    nodes = path(state, leaf)
    D_id = identity_matrix(params, pp, identity)
    targets = concat_cols([D_id - state.node_value(v, _draw_node(params, rng)) for v in nodes])
    Z = sample_left(pp.A, combine_matrices(pp.A_i, x), msk.T_A, targets, params.s, rng)
    return TokenSet(identity, x, _split(Z, nodes, params.m))


def upd_kg(params: SysParams, pp: SrpePublicParams, msk: MasterSecret, epoch: Epoch,
           rl: RevocationList, state: BinaryTreeState, rng: np.random.Generator) -> UpdateKey:
    """One ``Z2`` per cover node, ``[A | C_t] Z2 = U_theta``.

    A cover node that no token has touched yet gets its ``U_theta`` drawn
    here, so the relation always has a target.  With every leaf revoked the
    key is empty (see ``served_nodes``).
    """
    nodes = served_nodes(state, rl, epoch.counter)
    if not nodes:
        return UpdateKey(epoch, {})
    targets = concat_cols([state.node_value(v, _draw_node(params, rng)) for v in nodes])
    Z = sample_left(pp.A, epoch_matrix(params, pp, epoch), msk.T_A, targets, params.s, rng)
    return UpdateKey(epoch, _split(Z, nodes, params.m))


def revoke(state: BinaryTreeState, rl: RevocationList, identity, epoch: Epoch | int) -> RevocationList:
    """Record the identity's leaf as revoked from ``epoch`` on (idempotent)."""
    counter = epoch.counter if isinstance(epoch, Epoch) else int(epoch)
    rl.add(state.leaf_of(_ident(identity)), counter)
    return rl


# ---------------------------------------------------------------------------
# server

def tran_kg(token_set: TokenSet, uk: UpdateKey) -> TransformKey | None:
    """Transform key from the node shared by token and update key, or None if revoked."""
    common = sorted(set(token_set.entries) & set(uk.entries))
    if not common:
        return None
    node = common[0]
    return TransformKey(token_set.identity, token_set.x, uk.epoch, node,
                        token_set.entries[node], uk.entries[node])


def transform(params: SysParams, ct: Ciphertext, tk: TransformKey) -> PartialCiphertext:
    """``cbar = Z1^T [c1; c1_x] + Z2^T [c1; c10]``, a vector of length m."""
    if ct.epoch != tk.epoch:
        raise EpochMismatch(f"ciphertext is for epoch {ct.epoch}, key for {tk.epoch}")
    q = params.q
    c1x = combine_vectors(ct.c1_i, tk.x, params.n)
    cbar = (mat_mul(ZqMatrix(tk.Z1.T, q), concat_vectors([ct.c1, c1x]))
            + mat_mul(ZqMatrix(tk.Z2.T, q), concat_vectors([ct.c1, ct.c10])))
    return PartialCiphertext(ct.epoch, ct.c, ct.c2, ct.c2_i, cbar)


# ---------------------------------------------------------------------------
# sender and recipient

def enc(params: SysParams, pp: SrpePublicParams, y, epoch: Epoch, M: int, rng: np.random.Generator, *,
        noise: str = "chi", trace: SrpeTrace | None = None) -> Ciphertext:
    """Encrypt bit ``M`` under attribute ``y`` for ``epoch``; one ``s`` feeds every component.

    ``noise`` is ``"chi"`` normally; ``"zero"`` and ``"max"`` (every entry
    +-B) exist for error measurements and white-box tests.
    """
    n, m, q, kappa, ell = params.n, params.m, params.q, params.kappa, params.ell
    y = attribute_vector(y, ell, q)
    s = ZqVector.uniform(n, q, rng)
    e = draw_noise(params, noise, kappa, rng)
    e1 = draw_noise(params, noise, m, rng)
    e2 = draw_noise(params, noise, m, rng)
    R_i = [random_signs((m, m), rng) for _ in range(ell)]
    S_i = [random_signs((m, m), rng) for _ in range(ell)]
    R_bar = random_signs((m, m), rng)
    G = gadget_matrix(n, m, q)

    c = lwe_sample(pp.V, s, e + encode_message(M, kappa) * (q // 2))
    c1 = lwe_sample(pp.A, s, e1)
    c1_i = tuple(lwe_sample(a + G.scale(int(y_i)), s, int_matmul(r.T, e1))
                 for a, y_i, r in zip(pp.A_i, y, R_i))
    c10 = lwe_sample(epoch_matrix(params, pp, epoch), s, int_matmul(R_bar.T, e1))
    c2 = lwe_sample(pp.B, s, e2)
    c2_i = tuple(lwe_sample(b + G.scale(int(y_i)), s, int_matmul(r.T, e2))
                 for b, y_i, r in zip(pp.B_i, y, S_i))
    if trace is not None:
        trace.s, trace.e, trace.e1, trace.e2 = s, e, e1, e2
        trace.R_i, trace.S_i, trace.R_bar = R_i, S_i, R_bar
    return Ciphertext(epoch, c, c1, c1_i, c10, c2, c2_i)


def decrypt_vector(params: SysParams, pct: PartialCiphertext, sk: UserSecretKey) -> ZqVector:
    """``d = c - Z^T [c2; c2_x; cbar]`` before rounding."""
    if len(pct.c2_i) != params.ell:
        raise DimensionError("partial ciphertext has the wrong number of attribute components")
    c2x = combine_vectors(pct.c2_i, sk.x, params.n)
    stacked = concat_vectors([pct.c2, c2x, pct.cbar])
    return pct.c - mat_mul(ZqMatrix(sk.Z.T, params.q), stacked)


def dec(params: SysParams, pct: PartialCiphertext, sk: UserSecretKey) -> int | None:
    """The encrypted bit, or None (predicate mismatch or wrong key)."""
    return round_decode(decrypt_vector(params, pct, sk))


# ---------------------------------------------------------------------------
# exact relation checks

def check_user_key(params: SysParams, pp: SrpePublicParams, sk: UserSecretKey) -> bool:
    F = concat_cols([pp.B, combine_matrices(pp.B_i, sk.x), identity_matrix(params, pp, sk.identity)])
    return mat_mul(F, sk.Z) == pp.V


def check_token(params: SysParams, pp: SrpePublicParams, tok: TokenSet, state: BinaryTreeState) -> bool:
    F = concat_cols([pp.A, combine_matrices(pp.A_i, tok.x)])
    D_id = identity_matrix(params, pp, tok.identity)
    return all(mat_mul(F, Z1) == D_id - state.node_store[v] for v, Z1 in tok.entries.items())


def check_update_key(params: SysParams, pp: SrpePublicParams, uk: UpdateKey, state: BinaryTreeState) -> bool:
    F = concat_cols([pp.A, epoch_matrix(params, pp, uk.epoch)])
    return all(mat_mul(F, Z2) == state.node_store[v] for v, Z2 in uk.entries.items())


def check_transform_key(params: SysParams, pp: SrpePublicParams, tk: TransformKey) -> bool:
    left = mat_mul(concat_cols([pp.A, combine_matrices(pp.A_i, tk.x)]), tk.Z1)
    right = mat_mul(concat_cols([pp.A, epoch_matrix(params, pp, tk.epoch)]), tk.Z2)
    return left + right == identity_matrix(params, pp, tk.identity)
