"""Predicate encryption over lattices where a server does the revocation work (srpe).

Modules, bottom up:

* ``zq_linalg``: exact matrices over Z_q, gadget matrix, full-rank difference map
* ``gauss``: discrete Gaussians over Z and over lattices (Klein), bounded noise
* ``trapdoor``: trapdoor generation and preimage samplers
* ``afv_pe``: inner-product predicate encryption
* ``cs_method``: complete-subtree revocation tree
* ``params``: concrete parameter profiles, identity/time encoding
* ``scheme``: the revocable scheme itself
* ``wire``, ``keystore``, ``cli``: serialization and the command-line workflow
"""

from .params import SysParams, encode_id_time, sys
from .scheme import (
    Ciphertext,
    Epoch,
    PartialCiphertext,
    dec,
    enc,
    revoke,
    setup,
    token,
    tran_kg,
    transform,
    upd_kg,
    user_kg,
)

__version__ = "0.1.0"

__all__ = [
    "Ciphertext", "Epoch", "PartialCiphertext", "SysParams", "dec", "enc", "encode_id_time",
    "revoke", "setup", "sys", "token", "tran_kg", "transform", "upd_kg", "user_kg",
]
