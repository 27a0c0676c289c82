"""Discrete Gaussian sampling over Z and over lattices.

``sample_z`` and friends are plain rejection samplers on the window
``[c - tail_cut*s, c + tail_cut*s]``; lattice sampling is Klein's randomized
nearest-plane algorithm run on a precomputed Gram-Schmidt decomposition.
The Gram-Schmidt factorisation is computed once per basis in
``np.longdouble`` (64-bit mantissa on x86-64) and rounded into a float64
projection matrix; the per-sample pass then runs on BLAS in float64.  The
float64 centers agree with a full extended-precision pass to about 1e-11,
far below the smallest per-coordinate width.  Lattice points are always
produced as the exact integer combination ``basis @ z``.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtr

log = logging.getLogger(__name__)

LD = np.longdouble
DEFAULT_TAIL_CUT = 6.0
SEED_ENV = "SRPE_SEED"

# candidates drawn per pending coordinate in one vectorised rejection round
_OVERSAMPLE = 16


@dataclass(frozen=True)
class GaussParam:
    s: float
    tail_cut: float = DEFAULT_TAIL_CUT

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"Gaussian parameter must be positive, got {self.s}")
        if self.tail_cut < 6:
            raise ValueError(f"tail_cut must be >= 6, got {self.tail_cut}")


@dataclass(frozen=True)
class NoiseParam:
    """B-bounded noise: D_{Z, sigma*sqrt(2 pi)} conditioned on |x| <= bound."""

    bound: int
    sigma: float

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("bound must be non-negative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_bound(cls, bound: int) -> "NoiseParam":
        return cls(bound, max(bound / 6.0, 0.5))


def make_rng(seed=None) -> np.random.Generator:
    """Seeded generator for reproducible runs; OS entropy when ``seed`` is None.

    ``seed`` may be an int, bytes, or a hex string.
    """
    if seed is None:
        return np.random.default_rng()
    if isinstance(seed, str):
        seed = int(seed, 16)
    elif isinstance(seed, (bytes, bytearray)):
        seed = int.from_bytes(seed, "big")
    return np.random.default_rng(seed)


def rng_from_env(var: str = SEED_ENV) -> np.random.Generator:
    return make_rng(os.environ.get(var) or None)


# ---------------------------------------------------------------------------
# D_{Z,s,c}

def _window(centers: np.ndarray, s: np.ndarray, tail_cut: float):
    lo = np.ceil(centers - tail_cut * s)
    hi = np.floor(centers + tail_cut * s)
    near = np.rint(centers)
    lo = np.minimum(lo, near).astype(np.int64)
    hi = np.maximum(hi, near).astype(np.int64)
    return lo, hi


# widths (as standard deviations) below this use the uniform-window proposal
_SMALL_SIGMA = 0.75
_CHUNK = 1 << 18


def _uniform_proposal(c, sv, rng, tail_cut):
    """Rejection from the uniform distribution on the tail window."""
    lo, hi = _window(c, sv, tail_cut)
    width = hi - lo + 1
    out = np.empty(c.shape[0], dtype=np.int64)
    pending = np.arange(c.shape[0])
    inv = np.pi / (sv * sv)
    while pending.size:
        k = pending.size
        cand = lo[pending, None] + np.floor(rng.random((k, _OVERSAMPLE)) * width[pending, None]).astype(np.int64)
        diff = cand - c[pending, None]
        ok = rng.random((k, _OVERSAMPLE)) < np.exp(-inv[pending, None] * diff * diff)
        hit = ok.any(axis=1)
        first = ok.argmax(axis=1)
        rows = np.nonzero(hit)[0]
        out[pending[rows]] = cand[rows, first[rows]]
        pending = pending[~hit]
    return out


def _cell_mass(a, b):
    """Standard normal mass of [a, b], computed on the side that avoids cancellation."""
    right = a > 0
    return np.where(right, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


def _gaussian_proposal(c, sv, rng, tail_cut):
    """Rejection from a rounded continuous Gaussian.

    A proposal ``y = round(c + sigma g)`` has probability ``P(y)``, the
    normal mass of the unit cell around ``y``.  By Jensen,
    ``P(y) >= rho(y) exp(-1/(24 sigma^2)) / (sigma sqrt(2 pi))``, so
    accepting with ``rho(y) exp(-1/(24 sigma^2)) / (sigma sqrt(2 pi) P(y))``
    is a valid rejection step with target ``rho``; it accepts about
    ``exp(-1/(24 sigma^2))`` of proposals.
    """
    sigma = sv / math.sqrt(2 * math.pi)
    lo, hi = _window(c, sv, tail_cut)
    out = np.empty(c.shape[0], dtype=np.int64)
    pending = np.arange(c.shape[0])
    while pending.size:
        cp, sp = c[pending], sigma[pending]
        y = np.floor(cp + sp * rng.standard_normal(pending.size) + 0.5)
        u = (y - cp) / sp
        mass = _cell_mass(u - 0.5 / sp, u + 0.5 / sp)
        ratio = np.exp(-0.5 * u * u - 1.0 / (24.0 * sp * sp)) / (sp * math.sqrt(2 * math.pi) * mass)
        yi = y.astype(np.int64)
        ok = (rng.random(pending.size) < ratio) & (yi >= lo[pending]) & (yi <= hi[pending])
        out[pending[ok]] = yi[ok]
        pending = pending[~ok]
    return out


def sample_z_vec(s, centers, rng: np.random.Generator, tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """One draw from D_{Z, s_i, c_i} per entry of ``centers`` (``s`` broadcasts).

    Output is restricted to ``[c - tail_cut*s, c + tail_cut*s]``.
    """
    centers = np.asarray(centers, dtype=np.float64)
    shape = centers.shape
    c = centers.ravel()
    sv = np.broadcast_to(np.asarray(s, dtype=np.float64), shape).ravel()
    if (sv <= 0).any():
        raise ValueError("Gaussian parameter must be positive")
    out = np.empty(c.shape[0], dtype=np.int64)
    small = sv < _SMALL_SIGMA * math.sqrt(2 * math.pi)
    for j0 in range(0, c.shape[0], _CHUNK):
        sl = slice(j0, j0 + _CHUNK)
        cs, ss, sm = c[sl], sv[sl], small[sl]
        res = np.empty(cs.shape[0], dtype=np.int64)
        if sm.any():
            res[sm] = _uniform_proposal(cs[sm], ss[sm], rng, tail_cut)
        if not sm.all():
            big = ~sm
            res[big] = _gaussian_proposal(cs[big], ss[big], rng, tail_cut)
        out[sl] = res
    return out.reshape(shape)


def sample_z(s: float, center: float = 0.0, rng: np.random.Generator | None = None,
             tail_cut: float = DEFAULT_TAIL_CUT) -> int:
    """Single draw from D_{Z,s,center}.

    If the tail window contains no integer (only possible for tiny ``s``),
    the nearest integer to ``center`` is returned.
    """
    rng = rng if rng is not None else make_rng()
    return int(sample_z_vec(s, np.array([center], dtype=np.float64), rng, tail_cut)[0])


def sample_z_matrix(s: float, shape, rng: np.random.Generator, tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """Independent D_{Z,s} entries, centred at zero."""
    return sample_z_vec(s, np.zeros(shape), rng, tail_cut)


def sample_chi(p: NoiseParam, rng: np.random.Generator, size=None):
    """Truncated discrete Gaussian; every output satisfies ``|x| <= p.bound``."""
    n = 1 if size is None else int(np.prod(size))
    if p.bound == 0:
        out = np.zeros(n, dtype=np.int64)
    else:
        s = p.sigma * math.sqrt(2 * math.pi)
        out = np.empty(n, dtype=np.int64)
        pending = np.arange(n)
        while pending.size:
            k = pending.size
            cand = rng.integers(-p.bound, p.bound + 1, size=(k, _OVERSAMPLE), dtype=np.int64)
            ok = rng.random((k, _OVERSAMPLE)) < np.exp(-np.pi * cand.astype(np.float64) ** 2 / s**2)
            hit = ok.any(axis=1)
            first = ok.argmax(axis=1)
            rows = np.nonzero(hit)[0]
            out[pending[rows]] = cand[rows, first[rows]]
            pending = pending[~hit]
    assert np.abs(out).max(initial=0) <= p.bound
    if size is None:
        return int(out[0])
    return out.reshape(size)


# ---------------------------------------------------------------------------
# exact integer products

def int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integer product, via float64 BLAS whenever that is provably exact."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return a @ b
    amax = int(np.abs(a).max())
    bmax = int(np.abs(b).max())
    bound = amax * bmax * a.shape[-1]
    if bound < 2**53:
        return (a.astype(np.float64) @ b.astype(np.float64)).astype(np.int64)
    if bound < 2**63:
        return a @ b
    return (a.astype(object) @ b.astype(object)).astype(np.int64)


# ---------------------------------------------------------------------------
# Gram-Schmidt and Klein

_BLOCK = 48


class GramSchmidt:
    """Gram-Schmidt data of a basis whose columns are the basis vectors.

    ``basis = B~ @ U`` with ``U`` unit upper triangular and
    ``B~`` having orthogonal columns of squared norms ``sqnorms``.
    Computed by an LDL^T factorisation of the exact Gram matrix.
    """

    def __init__(self, basis: np.ndarray, mu: np.ndarray | None = None, sqnorms: np.ndarray | None = None):
        basis = np.asarray(basis, dtype=np.int64)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ValueError(f"basis must be square, got shape {basis.shape}")
        self.basis = basis
        self.dim = basis.shape[0]
        if mu is None:
            mu, sqnorms = self._ldl(int_matmul(basis.T, basis))
        self.mu = mu
        self.sqnorms = sqnorms
        self.norms = np.sqrt(sqnorms)

    @staticmethod
    def _ldl(gram: np.ndarray):
        m = gram.shape[0]
        a = gram.astype(LD)
        u = np.eye(m, dtype=LD)
        d = np.empty(m, dtype=LD)
        for j in range(m):
            d[j] = a[j, j]
            if not d[j] > 0:
                raise np.linalg.LinAlgError("basis is singular")
            row = a[j, j + 1:] / d[j]
            u[j, j + 1:] = row
            a[j + 1:, j + 1:] -= np.outer(row, a[j, j + 1:])
        return u, d

    @cached_property
    def gs_norm(self) -> float:
        """Length of the longest Gram-Schmidt vector."""
        return float(self.norms.max())

    def extend_identity(self, top: np.ndarray) -> "GramSchmidt":
        """Gram-Schmidt data of ``[[B, top], [0, I]]`` without refactoring."""
        m = self.dim
        k = top.shape[1]
        big = np.zeros((m + k, m + k), dtype=np.int64)
        big[:m, :m] = self.basis
        big[:m, m:] = top
        big[m:, m:] = np.eye(k, dtype=np.int64)
        mu = np.eye(m + k, dtype=LD)
        mu[:m, :m] = self.mu
        mu[:m, m:] = self.coords(top)
        sq = np.concatenate([self.sqnorms, np.ones(k, dtype=LD)])
        return GramSchmidt(big, mu, sq)

    def coords(self, c: np.ndarray) -> np.ndarray:
        """Coordinates of ``c`` along the Gram-Schmidt vectors: <c, b~_j> / |b~_j|^2.

        Extended precision throughout; used to build derived data.
        """
        c = np.asarray(c)
        if c.dtype.kind in "iu":
            g = int_matmul(self.basis.T, c).astype(LD)
        else:
            g = self.basis.T.astype(LD) @ c.astype(LD)
        # forward substitution with U^T, blocked
        y = np.array(g, dtype=LD)
        u = self.mu
        m = self.dim
        for j0 in range(0, m, _BLOCK):
            j1 = min(m, j0 + _BLOCK)
            if j0:
                y[j0:j1] -= u[:j0, j0:j1].T @ y[:j0]
            for j in range(j0 + 1, j1):
                y[j] -= u[j0:j, j] @ y[j0:j]
        return y / (self.sqnorms[:, None] if y.ndim == 2 else self.sqnorms)

    @cached_property
    def projection(self) -> np.ndarray:
        """float64 matrix P with ``P @ c`` = Gram-Schmidt coordinates of ``c``."""
        return self.coords(np.eye(self.dim, dtype=np.int64)).astype(np.float64)

    @cached_property
    def mu64(self) -> np.ndarray:
        return self.mu.astype(np.float64)

    def fast_coords(self, c: np.ndarray) -> np.ndarray:
        return self.projection @ np.asarray(c, dtype=np.float64)


def _klein_coeffs(gso: GramSchmidt, s: float, w: np.ndarray, rng, tail_cut: float, randomized: bool) -> np.ndarray:
    m, k = w.shape
    u = gso.mu64
    sig = s / gso.norms.astype(np.float64)
    z = np.empty((m, k), dtype=np.int64)
    for i0 in range(m, 0, -_BLOCK):
        lo = max(0, i0 - _BLOCK)
        for i in range(i0 - 1, lo - 1, -1):
            if randomized:
                zi = sample_z_vec(sig[i], w[i], rng, tail_cut)
            else:
                zi = np.rint(w[i]).astype(np.int64)
            z[i] = zi
            if i > lo:
                w[lo:i] -= np.outer(u[lo:i, i], zi)
        if lo:
            w[:lo] -= u[:lo, lo:i0] @ z[lo:i0]
    return z


def _as_columns(center):
    center = np.asarray(center)
    return (center[:, None], True) if center.ndim == 1 else (center, False)


def sample_d(basis, s: float, center, rng: np.random.Generator,
             tail_cut: float = DEFAULT_TAIL_CUT) -> np.ndarray:
    """Lattice point(s) from D_{L(basis), s, center} by Klein's algorithm.

    ``basis`` is an integer matrix (columns are basis vectors) or a
    precomputed :class:`GramSchmidt`.  ``center`` is a vector or a matrix
    whose columns are independent centers.  Returns exact integer points.
    """
    gso = basis if isinstance(basis, GramSchmidt) else GramSchmidt(basis)
    min_s = gso.gs_norm * smoothing_factor(gso.dim)
    if s < min_s:
        log.warning("Gaussian parameter %.3f is below |B~| * omega(sqrt(log m)) = %.3f", s, min_s)
    c, vec = _as_columns(center)
    w = gso.fast_coords(c)
    z = _klein_coeffs(gso, s, w, rng, tail_cut, randomized=True)
    v = int_matmul(gso.basis, z)
    return v[:, 0] if vec else v


def nearest_plane(basis, target) -> np.ndarray:
    """Babai's nearest-plane: a lattice point close to ``target`` (exact integers)."""
    gso = basis if isinstance(basis, GramSchmidt) else GramSchmidt(basis)
    c, vec = _as_columns(target)
    w = gso.fast_coords(c)
    z = _klein_coeffs(gso, 0.0, w, None, DEFAULT_TAIL_CUT, randomized=False)
    v = int_matmul(gso.basis, z)
    return v[:, 0] if vec else v


def smoothing_factor(dim: int, eps: float = 2.0**-40) -> float:
    """Concrete stand-in for omega(sqrt(log m)): sqrt(ln(2 m (1 + 1/eps)) / pi)."""
    return math.sqrt(math.log(2 * dim * (1 + 1 / eps)) / math.pi)
