"""Inner-product predicate encryption from LWE, gadget variant.

A key for predicate ``x`` decrypts a ciphertext for attribute ``y`` iff
``<x, y> = 0 mod q``.  Attribute vectors act on the public matrices through
``A_x = sum_i A_i G^{-1}(x_i G)``; on ciphertexts the same combination is
applied to the transposed side, which turns ``(A_i + y_i G)^T s`` into
``(A_x + <x, y> G)^T s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .gauss import int_matmul, sample_chi
from .params import SysParams
from .trapdoor import GTrapdoor, LatticeBasis, sample_basis_left, sample_left, sample_pre, trap_gen
from .zq_linalg import (
    DimensionError,
    ZqMatrix,
    ZqVector,
    concat_cols,
    concat_vectors,
    encode_message,
    gadget_inverse,
    gadget_matrix,
    mat_mul,
    round_decode,
)


# ---------------------------------------------------------------------------
# attribute combination, shared with the revocable scheme

def attribute_vector(x, ell: int, q: int) -> np.ndarray:
    x = np.mod(np.asarray(x, dtype=object), q).astype(np.int64)
    if x.shape != (ell,):
        raise DimensionError(f"expected a vector of length {ell}, got shape {x.shape}")
    return x


@lru_cache(maxsize=32)  # each entry is m x m int64
def gadget_scalar_inverse(x_i: int, n: int, m: int, q: int) -> np.ndarray:
    """``G^{-1}(x_i G)``, an m x m matrix over {0, 1} (read-only, cached)."""
    g = gadget_matrix(n, m, q)
    out = gadget_inverse(g.scale(int(x_i)), m)
    out.flags.writeable = False
    return out


def combine_matrices(mats: Sequence[ZqMatrix], x) -> ZqMatrix:
    """``sum_i M_i G^{-1}(x_i G)``."""
    q = mats[0].q
    n, m = mats[0].shape
    x = attribute_vector(x, len(mats), q)
    out = ZqMatrix.zeros(n, m, q)
    for m_i, x_i in zip(mats, x):
        if x_i:
            out = out + mat_mul(m_i, gadget_scalar_inverse(int(x_i), n, m, q))
    return out


def combine_vectors(vecs: Sequence[ZqVector], x, n: int) -> ZqVector:
    """``sum_i G^{-1}(x_i G)^T c_i``."""
    q = vecs[0].q
    m = len(vecs[0])
    x = attribute_vector(x, len(vecs), q)
    acc = np.zeros(m, dtype=np.int64)
    for c_i, x_i in zip(vecs, x):
        if x_i:
            # G^{-1}(.) is binary, so the product stays far below 2^63 after reducing
            acc = (acc + int_matmul(gadget_scalar_inverse(int(x_i), n, m, q).T, c_i.data) % q) % q
    return ZqVector(acc, q)


def combine_signed(mats: Sequence[np.ndarray], x, n: int, q: int) -> np.ndarray:
    """Integer ``sum_i R_i G^{-1}(x_i G)`` for short signed ``R_i`` (white-box checks)."""
    m = mats[0].shape[1]
    x = attribute_vector(x, len(mats), q)
    out = np.zeros_like(mats[0])
    for r_i, x_i in zip(mats, x):
        if x_i:
            out = out + int_matmul(r_i, gadget_scalar_inverse(int(x_i), n, m, q))
    return out


def random_signs(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform matrix over {-1, 1}."""
    return 2 * rng.integers(0, 2, size=shape, dtype=np.int64) - 1


def draw_noise(params: SysParams, mode: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """LWE noise: ``"chi"`` draws from the B-bounded distribution, ``"zero"``
    and ``"max"`` (random signs times B) are for error measurements."""
    if mode == "chi":
        return sample_chi(params.noise, rng, size)
    if mode == "zero":
        return np.zeros(size, dtype=np.int64)
    if mode == "max":
        return params.B * random_signs(size, rng)
    raise ValueError(f"unknown noise mode {mode!r}")


def lwe_sample(mat: ZqMatrix, secret: ZqVector, noise: np.ndarray) -> ZqVector:
    """``mat^T s + noise`` with an integer noise vector."""
    return mat_mul(mat.T, secret) + ZqVector(noise, mat.q)


# ---------------------------------------------------------------------------
# the scheme

@dataclass(frozen=True)
class PePublicParams:
    A: ZqMatrix
    A_i: tuple[ZqMatrix, ...]
    V: ZqMatrix

    @property
    def q(self) -> int:
        return self.A.q


@dataclass(frozen=True)
class PeSecretKey:
    x: np.ndarray
    Z: np.ndarray | None = None
    basis: LatticeBasis | None = None


@dataclass(frozen=True)
class PeCiphertext:
    c: ZqVector
    c0: ZqVector
    c_i: tuple[ZqVector, ...]

    @property
    def size(self) -> int:
        return len(self.c) + len(self.c0) + sum(len(v) for v in self.c_i)


@dataclass
class EncTrace:
    """Encryption randomness, filled in when passed to an encryptor (white-box tests)."""

    s: ZqVector | None = None
    e: np.ndarray | None = None
    e1: np.ndarray | None = None
    R_i: list | None = None


def pe_setup(params: SysParams, rng: np.random.Generator) -> tuple[PePublicParams, GTrapdoor]:
    n, m, q = params.n, params.m, params.q
    trap = trap_gen(n, q, m, rng)
    A_i = tuple(ZqMatrix.uniform(n, m, q, rng) for _ in range(params.ell))
    V = ZqMatrix.uniform(n, params.kappa, q, rng)
    return PePublicParams(trap.A, A_i, V), trap


def pe_keygen(params: SysParams, pp: PePublicParams, msk: GTrapdoor, x, rng: np.random.Generator,
              basis_form: bool = False) -> PeSecretKey:
    """Key for predicate ``x``: short ``Z`` with ``[A | A_x] Z = V``, or a basis for ``[A | A_x]``."""
    x = attribute_vector(x, params.ell, params.q)
    A_x = combine_matrices(pp.A_i, x)
    if basis_form:
        return PeSecretKey(x, basis=sample_basis_left(pp.A, A_x, msk, params.s, rng))
    return PeSecretKey(x, Z=sample_left(pp.A, A_x, msk, pp.V, params.s, rng))


def pe_key_matrix(params: SysParams, pp: PePublicParams, sk: PeSecretKey, rng: np.random.Generator | None = None):
    """The ``Z`` of a key, sampling it from the basis for basis-form keys."""
    if sk.Z is not None:
        return sk.Z
    F = concat_cols([pp.A, combine_matrices(pp.A_i, sk.x)])
    return sample_pre(F, sk.basis, pp.V, params.s, rng)


def pe_enc(params: SysParams, pp: PePublicParams, y, M: int, rng: np.random.Generator, *,
           noise: str = "chi", trace: EncTrace | None = None) -> PeCiphertext:
    n, m, q, kappa = params.n, params.m, params.q, params.kappa
    y = attribute_vector(y, params.ell, q)
    s = ZqVector.uniform(n, q, rng)
    e = draw_noise(params, noise, kappa, rng)
    e1 = draw_noise(params, noise, m, rng)
    R_i = [random_signs((m, m), rng) for _ in range(params.ell)]
    G = gadget_matrix(n, m, q)
    c = lwe_sample(pp.V, s, e + encode_message(M, kappa) * (q // 2))
    c0 = lwe_sample(pp.A, s, e1)
    c_i = tuple(lwe_sample(A_i + G.scale(int(y_i)), s, int_matmul(r.T, e1))
                for A_i, y_i, r in zip(pp.A_i, y, R_i))
    if trace is not None:
        trace.s, trace.e, trace.e1, trace.R_i = s, e, e1, R_i
    return PeCiphertext(c, c0, c_i)


def pe_decrypt_vector(params: SysParams, pp: PePublicParams, sk: PeSecretKey, ct: PeCiphertext,
                      rng: np.random.Generator | None = None) -> ZqVector:
    """``d = c - Z^T [c_0; c_x]`` before rounding."""
    Z = pe_key_matrix(params, pp, sk, rng)
    c_x = combine_vectors(ct.c_i, sk.x, params.n)
    return ct.c - mat_mul(ZqMatrix(Z.T, params.q), concat_vectors([ct.c0, c_x]))


def pe_dec(params: SysParams, pp: PePublicParams, sk: PeSecretKey, ct: PeCiphertext,
           rng: np.random.Generator | None = None) -> int | None:
    """The encrypted bit, or None when the predicate does not match."""
    if len(ct.c_i) != params.ell:
        raise DimensionError("ciphertext has the wrong number of attribute components")
    return round_decode(pe_decrypt_vector(params, pp, sk, ct, rng))
