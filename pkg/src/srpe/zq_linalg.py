"""Exact linear algebra over Z_q.

Matrices are stored as read-only ``int64`` numpy arrays holding canonical
residues in ``[0, q)``.  Products are computed exactly for any ``q < 2**61``
by splitting both operands into limbs small enough that every partial
product fits in the 53-bit mantissa of a float64, so the heavy lifting still
goes through BLAS.

The module also provides the gadget (primitive) matrix ``G``, its bit
decomposition inverse, the short basis of its q-ary lattice, a full-rank
difference map built from multiplication in ``F_q[X]/(f)``, and the
message encoding used by the encryption schemes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import sympy
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_irreducible_p

MAX_Q_BITS = 61


class DimensionError(ValueError):
    pass


class ModulusError(ValueError):
    pass


def ceil_log2(q: int) -> int:
    """Number of bits needed for residues mod q, i.e. ceil(log2 q)."""
    if q < 2:
        raise ModulusError(f"modulus must be >= 2, got {q}")
    return (q - 1).bit_length()


@dataclass(frozen=True)
class Modulus:
    q: int

    def __post_init__(self):
        if self.q < 2:
            raise ModulusError(f"modulus must be >= 2, got {self.q}")
        if self.q.bit_length() > MAX_Q_BITS:
            raise ModulusError(f"modulus exceeds {MAX_Q_BITS} bits")

    @property
    def bit_length(self) -> int:
        return ceil_log2(self.q)

    @property
    def is_prime(self) -> bool:
        return bool(sympy.isprime(self.q))

    def require_prime(self) -> None:
        if not self.is_prime:
            raise ModulusError(f"q = {self.q} is not prime")


# ---------------------------------------------------------------------------
# exact modular kernels on raw int64 arrays

def _to_residues(data, q: int) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.dtype.kind in "iu":
        if data.dtype.kind == "u" and data.dtype.itemsize == 8:
            data = np.array([int(x) % q for x in data.ravel()], dtype=np.int64).reshape(data.shape)
            return data
        return np.mod(data.astype(np.int64, copy=False), q)
    arr = np.asarray(data, dtype=object)
    if arr.size == 0:
        return np.zeros(arr.shape, dtype=np.int64)
    return np.asarray(arr % q, dtype=np.int64)


def _shl_mod(x: np.ndarray, bits: int, q: int) -> np.ndarray:
    # x in [0, q); shift in chunks that keep x * 2**chunk below 2**62
    chunk = 62 - q.bit_length()
    while bits > 0:
        c = min(chunk, bits)
        x = np.mod(np.left_shift(x, c), q)
        bits -= c
    return x


def mul_elementwise(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Exact elementwise ``a * b mod q`` for residue arrays (broadcasting)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    qbits = q.bit_length()
    if 2 * qbits <= 62:
        return np.mod(a * b, q)
    chunk = 62 - qbits
    nchunks = -(-qbits // chunk)
    mask = (1 << chunk) - 1
    acc = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.int64)
    for j in range(nchunks - 1, -1, -1):
        part = np.bitwise_and(np.right_shift(b, chunk * j), mask)
        acc = np.mod(_shl_mod(acc, chunk, q) + np.mod(a * part, q), q)
    return acc


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Exact ``a @ b mod q`` for residue arrays ``a`` (r x K) and ``b`` (K x c or K)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    K = a.shape[-1]
    if b.shape[0] != K:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    out_shape = a.shape[:-1] + b.shape[1:]
    if K == 0:
        return np.zeros(out_shape, dtype=np.int64)
    qbits = q.bit_length()
    limb = max(1, (52 - K.bit_length()) // 2)
    nl = -(-qbits // limb)
    if nl == 1:
        prod = a.astype(np.float64) @ b.astype(np.float64)
        return np.mod(prod.astype(np.int64), q)
    mask = (1 << limb) - 1
    A = [np.bitwise_and(np.right_shift(a, limb * i), mask).astype(np.float64) for i in range(nl)]
    B = [np.bitwise_and(np.right_shift(b, limb * i), mask).astype(np.float64) for i in range(nl)]
    acc = np.zeros(out_shape, dtype=np.int64)
    for d in range(2 * nl - 2, -1, -1):
        s = np.zeros(out_shape, dtype=np.int64)
        for i in range(max(0, d - nl + 1), min(d, nl - 1) + 1):
            s += (A[i] @ B[d - i]).astype(np.int64)
        acc = np.mod(_shl_mod(acc, limb, q) + np.mod(s, q), q)
    return acc


def centered(x: np.ndarray, q: int) -> np.ndarray:
    """Signed representatives in (-q/2, q/2]."""
    x = np.asarray(x, dtype=np.int64)
    return np.where(x > q // 2, x - q, x)


# ---------------------------------------------------------------------------
# value types

class _ZqArray:
    __slots__ = ("_data", "q")
    ndim = 0

    def __init__(self, data, q: int):
        q = int(q)
        Modulus(q)
        arr = _to_residues(data, q)
        if arr.ndim != self.ndim:
            raise DimensionError(f"{type(self).__name__} needs a {self.ndim}-d array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self._data = arr
        self.q = q

    @classmethod
    def _wrap(cls, arr: np.ndarray, q: int):
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.int64)
        arr.setflags(write=False)
        obj._data = arr
        obj.q = q
        return obj

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def modulus(self) -> Modulus:
        return Modulus(self.q)

    @property
    def shape(self) -> tuple:
        return self._data.shape

    def lift(self) -> np.ndarray:
        """Centered integer representatives."""
        return centered(self._data, self.q)

    def _check_same(self, other) -> None:
        if not isinstance(other, _ZqArray):
            raise TypeError(f"expected a Z_q array, got {type(other).__name__}")
        if other.q != self.q:
            raise ModulusError(f"modulus mismatch: {self.q} vs {other.q}")
        if other.shape != self.shape:
            raise DimensionError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other):
        self._check_same(other)
        return self._wrap(np.mod(self._data + other._data, self.q), self.q)

    def __sub__(self, other):
        self._check_same(other)
        return self._wrap(np.mod(self._data - other._data, self.q), self.q)

    def __neg__(self):
        return self._wrap(np.mod(-self._data, self.q), self.q)

    def scale(self, c: int):
        c = int(c) % self.q
        return self._wrap(mul_elementwise(self._data, np.int64(c), self.q), self.q)

    def __eq__(self, other):
        if not isinstance(other, _ZqArray):
            return NotImplemented
        return other.q == self.q and np.array_equal(self._data, other._data)

    def __hash__(self):
        return hash((type(self).__name__, self.q, self._data.shape, self._data.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, q={self.q})"


class ZqVector(_ZqArray):
    __slots__ = ()
    ndim = 1

    def __len__(self) -> int:
        return self._data.shape[0]

    @classmethod
    def zeros(cls, length: int, q: int) -> "ZqVector":
        return cls._wrap(np.zeros(length, dtype=np.int64), q)

    @classmethod
    def uniform(cls, length: int, q: int, rng: np.random.Generator) -> "ZqVector":
        return cls._wrap(rng.integers(0, q, size=length, dtype=np.int64), q)


class ZqMatrix(_ZqArray):
    __slots__ = ()
    ndim = 2

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def T(self) -> "ZqMatrix":
        return ZqMatrix._wrap(self._data.T, self.q)

    def column(self, j: int) -> ZqVector:
        return ZqVector._wrap(self._data[:, j], self.q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "ZqMatrix":
        return cls._wrap(np.zeros((rows, cols), dtype=np.int64), q)

    @classmethod
    def identity(cls, n: int, q: int) -> "ZqMatrix":
        return cls._wrap(np.eye(n, dtype=np.int64), q)

    @classmethod
    def uniform(cls, rows: int, cols: int, q: int, rng: np.random.Generator) -> "ZqMatrix":
        return cls._wrap(rng.integers(0, q, size=(rows, cols), dtype=np.int64), q)

    @classmethod
    def from_columns(cls, cols: Sequence[ZqVector]) -> "ZqMatrix":
        q = cols[0].q
        for c in cols:
            if c.q != q:
                raise ModulusError("modulus mismatch")
        return cls._wrap(np.stack([c.data for c in cols], axis=1), q)

    def __matmul__(self, other):
        return mat_mul(self, other)


def mat_mul(a: ZqMatrix, b):
    """Exact product ``a @ b`` over Z_q.

    ``b`` may be a :class:`ZqMatrix`, a :class:`ZqVector`, or an integer
    numpy array (reduced mod q first, so short signed matrices are fine).
    """
    if isinstance(b, np.ndarray):
        b = (ZqVector if b.ndim == 1 else ZqMatrix)(b, a.q)
    if not isinstance(a, ZqMatrix) or not isinstance(b, (ZqMatrix, ZqVector)):
        raise TypeError("mat_mul expects ZqMatrix @ (ZqMatrix | ZqVector)")
    if a.q != b.q:
        raise ModulusError(f"modulus mismatch: {a.q} vs {b.q}")
    if a.cols != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    out = matmul_mod(a.data, b.data, a.q)
    return type(b)._wrap(out, a.q)


def concat_cols(parts: Sequence[ZqMatrix]) -> ZqMatrix:
    """Column concatenation ``[A | B | ...]``."""
    if not parts:
        raise DimensionError("nothing to concatenate")
    q, rows = parts[0].q, parts[0].rows
    for p in parts:
        if p.q != q:
            raise ModulusError("modulus mismatch")
        if p.rows != rows:
            raise DimensionError(f"row mismatch: {p.rows} vs {rows}")
    if len(parts) == 1:
        return parts[0]
    return ZqMatrix._wrap(np.concatenate([p.data for p in parts], axis=1), q)


def concat_vectors(parts: Sequence[ZqVector]) -> ZqVector:
    """Stack column vectors on top of each other."""
    q = parts[0].q
    for p in parts:
        if p.q != q:
            raise ModulusError("modulus mismatch")
    return ZqVector._wrap(np.concatenate([p.data for p in parts]), q)


def inner_mod(x: Iterable[int], y: Iterable[int], q: int) -> int:
    return sum(int(a) * int(b) for a, b in zip(x, y)) % q


# ---------------------------------------------------------------------------
# solving over a prime field

def _inverse_small(m: list[list[int]], q: int) -> list[list[int]]:
    n = len(m)
    aug = [[x % q for x in row] + [int(i == j) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            raise ValueError("matrix is singular mod q")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = pow(aug[col][col], -1, q)
        aug[col] = [x * inv % q for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(x - f * y) % q for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def inverse_mod(a: ZqMatrix) -> ZqMatrix:
    """Inverse of a square matrix over the field Z_q (q prime)."""
    if a.rows != a.cols:
        raise DimensionError("inverse of a non-square matrix")
    a.modulus.require_prime()
    return ZqMatrix(_inverse_small(a.data.tolist(), a.q), a.q)


def is_invertible(a: ZqMatrix) -> bool:
    try:
        inverse_mod(a)
    except ValueError as exc:
        if isinstance(exc, ModulusError):
            raise
        return False
    return True


@lru_cache(maxsize=64)
def _pivot_columns(key: bytes, rows: int, cols: int, q: int) -> tuple[int, ...]:
    a = np.frombuffer(key, dtype=np.int64).reshape(rows, cols)
    m = [[int(x) for x in row] for row in a]
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if m[i][c] % q), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], -1, q)
        m[r] = [x * inv % q for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] % q:
                f = m[i][c]
                m[i] = [(x - f * y) % q for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    if r < rows:
        raise ValueError("matrix does not have full row rank mod q")
    return tuple(pivots)


def solve_mod(a: ZqMatrix, u):
    """Some solution ``x`` of ``a @ x = u`` for a full-row-rank ``a`` (q prime).

    Returns an object of the same kind as ``u``; the solution is supported on
    a set of pivot columns and is not short.
    """
    a.modulus.require_prime()
    pivots = list(_pivot_columns(a.data.tobytes(), a.rows, a.cols, a.q))
    sub = ZqMatrix._wrap(a.data[:, pivots], a.q)
    inv = inverse_mod(sub)
    part = mat_mul(inv, u)
    out = np.zeros((a.cols,) + u.shape[1:], dtype=np.int64)
    out[pivots] = part.data
    return type(u)._wrap(out, a.q)


# ---------------------------------------------------------------------------
# gadget matrix

def gadget_width(n: int, q: int) -> int:
    return n * ceil_log2(q)


def gadget_matrix(n: int, m: int, q: int) -> ZqMatrix:
    """``G = I_n (x) (1, 2, ..., 2^(k-1))`` zero-padded on the right to n x m."""
    k = ceil_log2(q)
    if m < n * k:
        raise DimensionError(f"m = {m} < n*ceil(log q) = {n * k}")
    g = np.zeros((n, m), dtype=np.int64)
    powers = np.array([pow(2, j, q) for j in range(k)], dtype=np.int64)
    for i in range(n):
        g[i, i * k:(i + 1) * k] = powers
    return ZqMatrix(g, q)


def gadget_inverse(u, m: int | None = None) -> np.ndarray:
    """Bit decomposition ``X = G^{-1}(U)`` with entries in {0,1} and ``G X = U``.

    ``u`` is an n x c :class:`ZqMatrix` (or a length-n :class:`ZqVector`);
    the result has ``m`` rows (default n*ceil(log q)) with zeros in the
    padded rows.
    """
    q = u.q
    k = ceil_log2(q)
    data = u.data
    vec = data.ndim == 1
    if vec:
        data = data[:, None]
    n, c = data.shape
    if m is None:
        m = n * k
    if m < n * k:
        raise DimensionError(f"m = {m} < n*ceil(log q) = {n * k}")
    shifts = np.arange(k, dtype=np.int64)
    # (n, k, c) bits -> rows ordered block by block
    bits = np.right_shift(data[:, None, :], shifts[None, :, None]) & 1
    x = np.zeros((m, c), dtype=np.int64)
    x[: n * k] = bits.reshape(n * k, c)
    return x[:, 0] if vec else x


def _gadget_block_basis(q: int) -> np.ndarray:
    k = ceil_log2(q)
    s = np.zeros((k, k), dtype=np.int64)
    for j in range(k - 1):
        s[j, j] = 2
        s[j + 1, j] = -1
    if q == 1 << k:
        s[k - 1, k - 1] = 2
    else:
        s[:, k - 1] = [(q >> i) & 1 for i in range(k)]
    return s


def gadget_basis(n: int, m: int, q: int) -> np.ndarray:
    """Short integer basis ``T_G`` of the q-ary lattice of ``gadget_matrix(n, m, q)``.

    Block diagonal with one k x k block per row of G, identity on padded
    coordinates.  Its Gram-Schmidt norm is at most sqrt(5).
    """
    k = ceil_log2(q)
    if m < n * k:
        raise DimensionError(f"m = {m} < n*ceil(log q) = {n * k}")
    block = _gadget_block_basis(q)
    t = np.eye(m, dtype=np.int64)
    for i in range(n):
        t[i * k:(i + 1) * k, i * k:(i + 1) * k] = block
    return t


# ---------------------------------------------------------------------------
# full-rank difference map

def find_irreducible(n: int, q: int) -> tuple[int, ...]:
    """Deterministically find a monic irreducible polynomial of degree n over F_q.

    Coefficients are returned lowest degree first, without the leading 1.
    Candidates are enumerated by reading a counter as little-endian digits
    in a small radix, so polynomials with tiny coefficients come first.
    """
    Modulus(q).require_prime()
    if n < 1:
        raise ValueError("degree must be positive")
    if n == 1:
        return (0,)
    radix = min(q, 16)
    for t in itertools.count(1):
        coeffs = []
        for _ in range(n):
            coeffs.append(t % radix)
            t //= radix
        if t or coeffs[0] == 0:
            if t:
                break
            continue
        dense = [1] + coeffs[::-1]  # sympy wants highest degree first
        if gf_irreducible_p(dense, q, ZZ):
            return tuple(coeffs)
    raise RuntimeError("no irreducible polynomial found")  # pragma: no cover


def frd_map(v, poly: Sequence[int]) -> ZqMatrix:
    """Full-rank difference map ``H(v)``: multiplication by ``v(X)`` mod ``f(X)``.

    ``poly`` holds the low coefficients of the monic irreducible ``f`` of
    degree n = len(v).  Column j of the result is ``v(X) * X^j mod f``.
    """
    q = v.q
    Modulus(q).require_prime()
    n = len(v)
    if len(poly) != n:
        raise DimensionError(f"polynomial degree {len(poly)} != vector length {n}")
    p = [int(x) for x in v.data]
    cols = []
    for _ in range(n):
        cols.append(p)
        lead = p[-1]
        shifted = [0] + p[:-1]
        p = [(c - lead * f) % q for c, f in zip(shifted, poly)]
    return ZqMatrix(np.array(cols, dtype=object).T, q)


# ---------------------------------------------------------------------------
# message encoding

def encode_message(b: int, kappa: int) -> np.ndarray:
    """``(b, 0, ..., 0)`` of length kappa."""
    if b not in (0, 1):
        raise ValueError(f"message must be a bit, got {b!r}")
    out = np.zeros(kappa, dtype=np.int64)
    out[0] = b
    return out


def round_bits(d: np.ndarray, q: int) -> np.ndarray:
    """Per-coordinate ``round(2 d / q) mod 2``: 1 iff d in [ceil(q/4), floor(3q/4))."""
    d = np.mod(np.asarray(d, dtype=np.int64), q)
    lo = -(-q // 4)
    hi = (3 * q) // 4
    return ((d >= lo) & (d < hi)).astype(np.int64)


def round_decode(d: ZqVector) -> int | None:
    """Decode a noisy ``floor(q/2) * encode(M)``; ``None`` stands for the failure symbol."""
    bits = round_bits(d.data, d.q)
    if bits[1:].any():
        return None
    return int(bits[0])
