"""System parameters, concrete profiles, and the identity/time encoding.

The profiles here carry NO SECURITY CLAIM.  They are correctness-testing
parameters: q was sized by running the whole pipeline and measuring the
decryption error (see ``scripts/size_profiles.py``), not by any hardness
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gauss import NoiseParam, smoothing_factor
from .zq_linalg import Modulus, ZqVector, ceil_log2, find_irreducible

BANNER = "NO SECURITY CLAIM - correctness-testing parameters"

# Pinned by scripts/size_profiles.py: q is the next prime above
# 5 * 8 * (max measured |error|), iterated until m stops moving, and
# omega_const = 8 * (max measured |error|) / (s ell m^2 B).  Custom
# parameters reuse the toy calibration unless told otherwise.
TOY_OMEGA = 29.93


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class SysParams:
    n: int
    N: int
    ell: int
    kappa: int
    q: int
    m: int
    s: float
    B: int
    frd_poly: tuple[int, ...]
    profile_name: str = "custom"
    omega_const: float = TOY_OMEGA
    banner: str = field(default=BANNER, compare=False)

    def __post_init__(self):
        Modulus(self.q).require_prime()
        if min(self.n, self.N, self.ell) < 1:
            raise ProfileError("n, N and ell must be positive")
        if self.kappa < 8:
            raise ProfileError(f"kappa must be >= 8, got {self.kappa}")
        if self.m != 2 * self.n * ceil_log2(self.q):
            raise ProfileError(f"m must be 2 n ceil(log q) = {2 * self.n * ceil_log2(self.q)}")
        if len(self.frd_poly) != self.n:
            raise ProfileError("irreducible polynomial has the wrong degree")
        if self.B < 1 or not self.s > 0:
            raise ProfileError("B and s must be positive")
        if not self.omega_const > 0:
            raise ProfileError("omega_const must be positive")
        if not self.error_budget < self.q / 5:
            raise ProfileError(
                f"error budget {self.error_budget:.3g} does not fit under q/5 = {self.q / 5:.3g}")

    @property
    def k(self) -> int:
        return ceil_log2(self.q)

    @property
    def depth(self) -> int:
        return max(0, (self.N - 1).bit_length())

    @property
    def noise(self) -> NoiseParam:
        return NoiseParam.from_bound(self.B)

    @property
    def error_budget(self) -> float:
        """``s * ell * m^2 * B * omega_const``: the headroom the profile promises."""
        return self.s * self.ell * self.m**2 * self.B * self.omega_const

    @property
    def pp_bits(self) -> int:
        """Bit size of the public parameters, ((2 ell + 4) n m + n kappa) log q."""
        return ((2 * self.ell + 4) * self.n * self.m + self.n * self.kappa) * self.k

    def replace(self, **kw) -> "SysParams":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "banner"}
        d.update(kw)
        return SysParams(**d)


def default_s(n: int, q: int, gs_norm: float | None = None) -> float:
    """Gaussian parameter for the key samplers.

    ``gs_norm`` defaults to ``2 sqrt(n k)``, an envelope over measured
    trapdoor quality with the default R parameter (observed ratios stay
    below 1.75); the 3m smoothing factor covers the widest sampled lattice,
    the 3m-row user keys.
    """
    k = ceil_log2(q)
    m = 2 * n * k
    if gs_norm is None:
        gs_norm = 2.0 * math.sqrt(n * k)
    return float(math.ceil(gs_norm * smoothing_factor(3 * m)))


def default_bound(n: int) -> int:
    return 2 * math.isqrt(n - 1) + 2 if n > 1 else 2


def build(n: int, N: int, ell: int, kappa: int, q: int, *, s: float | None = None,
          B: int | None = None, omega_const: float = TOY_OMEGA, name: str = "custom") -> SysParams:
    m = 2 * n * ceil_log2(q)
    return SysParams(
        n=n, N=N, ell=ell, kappa=kappa, q=q, m=m,
        s=default_s(n, q) if s is None else float(s),
        B=default_bound(n) if B is None else B,
        frd_poly=find_irreducible(n, q),
        profile_name=name,
        omega_const=omega_const,
    )


_PROFILES = {
    # max |error| 3916760628 over chi, max and zero noise sweeps
    "toy": dict(n=8, N=8, ell=4, kappa=16, q=156670425139, omega_const=TOY_OMEGA),
    # max |error| 39152711304
    "small": dict(n=16, N=64, ell=4, kappa=16, q=1566108452171, omega_const=32.3088),
}


def profile_names() -> list[str]:
    return sorted(_PROFILES) + ["custom"]


def sys(profile: str = "toy", **custom) -> SysParams:
    """Concrete parameters for a named profile.

    ``custom`` takes ``n, N, ell, kappa, q`` (and optionally ``s``, ``B``,
    ``omega_const``) as keyword arguments.
    """
    if profile == "custom":
        try:
            return build(custom.pop("n"), custom.pop("N"), custom.pop("ell"),
                         custom.pop("kappa"), custom.pop("q"), name="custom", **custom)
        except KeyError as exc:
            raise ProfileError(f"custom profile needs {exc.args[0]}") from None
    if profile not in _PROFILES:
        raise ProfileError(f"unknown profile {profile!r}; choose from {profile_names()}")
    if custom:
        raise ProfileError("only the custom profile takes overrides")
    return build(name=profile, **_PROFILES[profile])


# ---------------------------------------------------------------------------
# identities and time periods as vectors in Z_q^n

def max_label_len(n: int, q: int) -> int:
    """Longest byte label whose bijective base-256 value stays below q^n."""
    cap = q**n
    total, length = 0, 0
    while total + 256 ** (length + 1) < cap:
        length += 1
        total += 256**length
    return length


def encode_id_time(label: bytes | str, n: int, q: int) -> ZqVector:
    """Injective map from byte labels to Z_q^n.

    The label is read as a bijective base-256 numeral (so ``b""`` and
    ``b"\\x00"`` differ), and that integer is written as n little-endian
    base-q digits.
    """
    if isinstance(label, str):
        label = label.encode()
    if len(label) > max_label_len(n, q):
        raise ValueError(f"label of {len(label)} bytes exceeds {max_label_len(n, q)} for n={n}, q={q}")
    value = 0
    for byte in reversed(label):
        value = value * 256 + byte + 1
    digits = []
    for _ in range(n):
        value, d = divmod(value, q)
        digits.append(d)
    return ZqVector(np.array(digits, dtype=np.int64), q)


def decode_id_time(v: ZqVector) -> bytes:
    value = 0
    for d in reversed(v.data.tolist()):
        value = value * v.q + int(d)
    out = bytearray()
    while value:
        value -= 1
        value, byte = divmod(value, 256)
        out.append(byte)
    return bytes(out)
