"""Lattice trapdoors and preimage sampling.

Trapdoors follow Micciancio-Peikert: ``A = [Abar | G - Abar R]`` so that
``A @ [R; I] = G``.  The short basis of the q-ary lattice of ``A`` is
materialised explicitly, which lets every sampler below go through the same
Klein code path in :mod:`srpe.gauss`.
"""

from __future__ import annotations

import logging
from functools import cached_property

import numpy as np

from .gauss import (
    DEFAULT_TAIL_CUT,
    GramSchmidt,
    int_matmul,
    nearest_plane,
    sample_d,
    sample_z_matrix,
    smoothing_factor,
)
from .zq_linalg import (
    DimensionError,
    ZqMatrix,
    ZqVector,
    ceil_log2,
    concat_cols,
    gadget_basis,
    gadget_inverse,
    gadget_matrix,
    mat_mul,
    solve_mod,
)

log = logging.getLogger(__name__)

# Gaussian parameter of the entries of R in trap_gen; sqrt(pi) gives
# entry variance 1/2, the same as a uniform-ish {-1, 0, 1} trapdoor
TRAPDOOR_R_PARAM = float(np.sqrt(np.pi))


class SamplingError(RuntimeError):
    pass


def _g_trapdoor_basis(abar: np.ndarray, r: np.ndarray, q: int) -> np.ndarray:
    """Basis of the q-ary lattice of ``[Abar | G - Abar R]``.

    ``[[R T_G, I + R W], [T_G, W]]`` with ``W = -G^{-1}(Abar)``; the gadget
    width is taken from the number of columns of ``r``.
    """
    n, mbar = abar.shape
    w = r.shape[1]
    t_g = gadget_basis(n, w, q)
    wmat = -gadget_inverse(ZqMatrix(abar, q), w)
    top = np.concatenate([int_matmul(r, t_g), np.eye(mbar, dtype=np.int64) + int_matmul(r, wmat)], axis=1)
    bottom = np.concatenate([t_g, wmat], axis=1)
    return np.concatenate([top, bottom], axis=0)


class LatticeBasis:
    """A short basis for the q-ary lattice of a public matrix.

    Holds the public matrix ``A`` and the integer basis (columns).  Preimages
    of arbitrary targets are found by linear algebra over Z_q followed by
    nearest-plane reduction.
    """

    def __init__(self, A: ZqMatrix, basis: np.ndarray, gso: GramSchmidt | None = None):
        self.A = A
        self.basis = np.asarray(basis, dtype=np.int64)
        if self.basis.shape != (A.cols, A.cols):
            raise DimensionError(f"basis shape {self.basis.shape} does not match A {A.shape}")
        if gso is not None:
            self.__dict__["gso"] = gso

    @cached_property
    def gso(self) -> GramSchmidt:
        return GramSchmidt(self.basis)

    @property
    def gs_norm(self) -> float:
        return self.gso.gs_norm

    @property
    def q(self) -> int:
        return self.A.q

    def preimage(self, u):
        """Some short integer ``t`` with ``A t = u`` (vector or matrix ``u``)."""
        t = solve_mod(self.A, u).lift()
        return t - nearest_plane(self.gso, t)


class GTrapdoor(LatticeBasis):
    """G-trapdoor ``R`` for ``A = [Abar | G - Abar R]`` plus the derived basis ``T_A``."""

    def __init__(self, A: ZqMatrix, R: np.ndarray, basis: np.ndarray | None = None):
        R = np.asarray(R, dtype=np.int64)
        mbar, w = R.shape
        if A.cols != mbar + w:
            raise DimensionError("R does not match A")
        self.R = R
        if basis is None:
            basis = _g_trapdoor_basis(A.data[:, :mbar], R, A.q)
        super().__init__(A, basis)

    @property
    def gadget_cols(self) -> int:
        return self.R.shape[1]

    def preimage(self, u):
        """``[R; I] G^{-1}(u)``: exact, short, no linear algebra needed."""
        x = gadget_inverse(u, self.gadget_cols)
        return np.concatenate([int_matmul(self.R, x), x], axis=0)


def trap_gen(n: int, q: int, m: int, rng: np.random.Generator,
             r_param: float = TRAPDOOR_R_PARAM) -> GTrapdoor:
    """Near-uniform ``A`` in Z_q^{n x m} with a short basis of its q-ary lattice."""
    w = n * ceil_log2(q)
    if m < 2 * w:
        raise DimensionError(f"trap_gen needs m >= 2 n ceil(log q) = {2 * w}, got {m}")
    mbar = m - w
    abar = rng.integers(0, q, size=(n, mbar), dtype=np.int64)
    R = sample_z_matrix(r_param, (mbar, w), rng)
    g = gadget_matrix(n, w, q)
    right = g - mat_mul(ZqMatrix(abar, q), R)
    A = concat_cols([ZqMatrix(abar, q), right])
    return GTrapdoor(A, R)


def _as_trapdoor(A: ZqMatrix, T) -> LatticeBasis:
    if isinstance(T, LatticeBasis):
        if T.A is not A and T.A != A:
            raise ValueError("trapdoor does not belong to this matrix")
        return T
    if isinstance(T, GramSchmidt):
        return LatticeBasis(A, T.basis, T)
    return LatticeBasis(A, T)


def _check_quality(s: float, gs_norm: float, dim: int) -> None:
    need = gs_norm * smoothing_factor(dim)
    if s < need:
        log.warning("s = %.2f below |T~| * omega(sqrt(log m)) = %.2f; proceeding", s, need)


def _target_columns(u):
    if isinstance(u, ZqVector):
        return ZqMatrix._wrap(u.data[:, None], u.q), True
    return u, False


def verify_preimage(A: ZqMatrix, z: np.ndarray, u) -> bool:
    """Exact check ``A z = u mod q``."""
    return mat_mul(A, z) == u


def sample_pre(A: ZqMatrix, T_A, u, s: float, rng: np.random.Generator,
               tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """Short ``e`` with ``A e = u`` distributed close to D_{Lambda^u_q(A), s}.

    ``u`` may be a vector or a matrix (sampled column by column, in one
    batch).  ``T_A`` is a :class:`LatticeBasis`/:class:`GTrapdoor`, a
    :class:`GramSchmidt`, or a raw basis.
    """
    trap = _as_trapdoor(A, T_A)
    _check_quality(s, trap.gs_norm, A.cols)
    cols, vec = _target_columns(u)
    t = trap.preimage(cols)
    e = t - sample_d(trap.gso, s, t, rng, tail_cut)
    if not verify_preimage(A, e, cols):
        raise SamplingError("preimage failed exact verification")
    return e[:, 0] if vec else e


def sample_left(A: ZqMatrix, M: ZqMatrix, T_A, u, s: float, rng: np.random.Generator,
                tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """Short ``z`` with ``[A | M] z = u``, using only a trapdoor for ``A``.

    The bottom block is drawn from D_{Z^k, s} and the top block is a
    preimage of the remaining target under ``A``.
    """
    if A.rows != M.rows or A.q != M.q:
        raise DimensionError("A and M must share rows and modulus")
    cols, vec = _target_columns(u)
    z2 = sample_z_matrix(s, (M.cols, cols.cols), rng, tail_cut)
    rest = cols - mat_mul(M, z2)
    z1 = sample_pre(A, T_A, rest, s, rng, tail_cut)
    z = np.concatenate([z1, z2], axis=0)
    return z[:, 0] if vec else z


def sample_basis_left(A: ZqMatrix, M: ZqMatrix, T_A, s: float | None = None,
                      rng: np.random.Generator | None = None) -> LatticeBasis:
    """Basis of the q-ary lattice of ``[A | M]`` with the same Gram-Schmidt norm as ``T_A``.

    Deterministic extension ``[[T_A, W], [0, I]]`` with ``A W = -M``.  The
    output contains ``T_A`` verbatim, so it must be treated as being as
    secret as the master trapdoor.  ``s`` and ``rng`` are accepted for
    interface compatibility and unused.
    """
    trap = _as_trapdoor(A, T_A)
    if A.rows != M.rows or A.q != M.q:
        raise DimensionError("A and M must share rows and modulus")
    W = trap.preimage(-M)
    gso = trap.gso.extend_identity(W)
    return LatticeBasis(concat_cols([A, M]), gso.basis, gso)


def sample_right(A: ZqMatrix, R: np.ndarray, G: ZqMatrix, T_G: np.ndarray, u, s: float,
                 rng: np.random.Generator, tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """Short ``z`` with ``[A | A R + G] z = u``, using the gadget trapdoor and ``R``.

    ``[A | A R + G] = [A | G - A(-R)]`` is a G-trapdoor instance with
    trapdoor ``-R``; its basis is built from ``T_G`` and sampled with Klein.
    """
    R = np.asarray(R, dtype=np.int64)
    if R.shape != (A.cols, G.cols):
        raise DimensionError(f"R must be {A.cols} x {G.cols}")
    if not np.array_equal(G.data, gadget_matrix(G.rows, G.cols, G.q).data):
        raise ValueError("G must be the gadget matrix")
    F = concat_cols([A, mat_mul(A, R) + G])
    basis = _g_trapdoor_basis(A.data, -R, A.q)
    if not np.array_equal(basis[A.cols:, :G.cols], np.asarray(T_G)):
        raise ValueError("T_G does not match the gadget basis")
    trap = GTrapdoor(F, -R, basis)
    return sample_pre(F, trap, u, s, rng, tail_cut)
