"""Binary serialization of matrices and scheme objects.

Matrix record (little-endian throughout)::

    "SRPE" | u16 version | u8 tag | u64 q | u32 rows | u32 cols | entries

Entries are row-major residues in [0, q), each ``ceil(bit_length(q) / 8)``
bytes.  Short signed matrices (keys, trapdoors) are stored as residues and
lifted back to the centered range on load.

Object container::

    "SRPE" | u16 version | u8 object tag | u8 flags | u32 len | meta JSON | u32 count | records

``flags`` bit 0 marks secret material.  The JSON is written with sorted
keys and no whitespace so equal objects give equal bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from enum import IntEnum

import numpy as np

from .params import SysParams
from .scheme import (
    Ciphertext,
    Epoch,
    MasterSecret,
    PartialCiphertext,
    SrpePublicParams,
    TokenSet,
    TransformKey,
    UpdateKey,
    UserSecretKey,
)
from .trapdoor import GTrapdoor
from .zq_linalg import Modulus, ZqMatrix, ZqVector, centered

MAGIC = b"SRPE"
VERSION = 1
FLAG_SECRET = 0x01

_REC = struct.Struct("<4sHBQII")
_OBJ = struct.Struct("<4sHBBI")


class WireError(ValueError):
    pass


class Tag(IntEnum):
    PARAMS = 1
    PP = 2
    MSK = 3
    SK = 4
    TOKEN = 5
    UK = 6
    TK = 7
    CT = 8
    PCT = 9
    NODE = 10
    # record kinds
    RESIDUES = 0x20
    SIGNED = 0x21
    VECTOR = 0x22


SECRET_TAGS = {Tag.MSK, Tag.SK}


def _tag(value: int) -> Tag:
    try:
        return Tag(value)
    except ValueError:
        raise WireError(f"unknown tag {value}") from None


# ---------------------------------------------------------------------------
# matrix records

def entry_bytes(q: int) -> int:
    return (Modulus(q).bit_length + 7) // 8


def encode_matrix(data: np.ndarray, q: int, tag: Tag = Tag.RESIDUES) -> bytes:
    data = np.asarray(data, dtype=np.int64)
    if data.ndim == 1:
        data = data[:, None]
    rows, cols = data.shape
    res = np.mod(data, q).astype("<u8")
    width = entry_bytes(q)
    body = res.reshape(-1).view(np.uint8).reshape(-1, 8)[:, :width].tobytes()
    return _REC.pack(MAGIC, VERSION, int(tag), q, rows, cols) + body


def decode_matrix(buf: bytes, offset: int = 0) -> tuple[Tag, int, np.ndarray, int]:
    """Parse one record; returns (tag, q, array, next offset).

    Residue and vector records come back in [0, q); signed records are
    lifted to the centered range.
    """
    try:
        magic, version, tag, q, rows, cols = _REC.unpack_from(buf, offset)
    except struct.error:
        raise WireError("truncated matrix header") from None
    if magic != MAGIC:
        raise WireError("bad magic")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    width = entry_bytes(q)
    start = offset + _REC.size
    end = start + rows * cols * width
    if end > len(buf):
        raise WireError("truncated matrix body")
    raw = np.zeros((rows * cols, 8), dtype=np.uint8)
    raw[:, :width] = np.frombuffer(buf, dtype=np.uint8, count=rows * cols * width, offset=start).reshape(-1, width)
    data = raw.view("<u8").reshape(rows, cols).astype(np.int64)
    if (data >= q).any():
        raise WireError("entry out of range")
    tag = _tag(tag)
    if tag == Tag.SIGNED:
        data = centered(data, q)
    elif tag == Tag.VECTOR:
        data = data[:, 0]
    return tag, q, data, end


# ---------------------------------------------------------------------------
# object container

def pack(tag: Tag, meta: dict, records: list[bytes], secret: bool | None = None) -> bytes:
    if secret is None:
        secret = tag in SECRET_TAGS
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    head = _OBJ.pack(MAGIC, VERSION, int(tag), FLAG_SECRET if secret else 0, len(blob))
    return head + blob + struct.pack("<I", len(records)) + b"".join(records)


def unpack(buf: bytes) -> tuple[Tag, bool, dict, list[np.ndarray], int]:
    """Returns (tag, secret flag, meta, arrays, q of the first record or 0)."""
    try:
        magic, version, tag, flags, mlen = _OBJ.unpack_from(buf, 0)
    except struct.error:
        raise WireError("truncated object header") from None
    if magic != MAGIC:
        raise WireError("bad magic")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    off = _OBJ.size
    meta = json.loads(buf[off:off + mlen].decode())
    off += mlen
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    arrays, q = [], 0
    for _ in range(count):
        _, q_rec, arr, off = decode_matrix(buf, off)
        q = q or q_rec
        arrays.append(arr)
    if off != len(buf):
        raise WireError("trailing bytes")
    return _tag(tag), bool(flags & FLAG_SECRET), meta, arrays, q


def peek(buf: bytes) -> tuple[Tag, bool]:
    """Object tag and secret flag without parsing the body."""
    try:
        magic, version, tag, flags, _ = _OBJ.unpack_from(buf, 0)
    except struct.error:
        raise WireError("truncated object header") from None
    if magic != MAGIC:
        raise WireError("bad magic")
    return _tag(tag), bool(flags & FLAG_SECRET)


# ---------------------------------------------------------------------------
# scheme objects

def _epoch_meta(ep: Epoch) -> dict:
    return {"epoch": ep.counter, "label": ep.label.hex()}


def _epoch(meta: dict) -> Epoch:
    return Epoch(int(meta["epoch"]), bytes.fromhex(meta["label"]))


def _ints(x) -> list[int]:
    return [int(v) for v in x]


def _vecs(vs, q) -> list[bytes]:
    return [encode_matrix(v.data, q, Tag.VECTOR) for v in vs]


def dump(obj, q: int | None = None) -> bytes:
    """Serialize a scheme object, or a node matrix ``ZqMatrix``.

    Keys, tokens and update/transform keys hold plain integer matrices and
    need the modulus ``q``.
    """
    if isinstance(obj, SysParams):
        meta = asdict(obj)
        meta.pop("banner")
        meta["frd_poly"] = list(obj.frd_poly)
        return pack(Tag.PARAMS, meta, [])
    if isinstance(obj, SrpePublicParams):
        return pack(Tag.PP, {"ell": len(obj.A_i)}, [encode_matrix(m.data, obj.q) for m in obj.matrices()])
    if isinstance(obj, MasterSecret):
        recs = []
        for t in (obj.T_A, obj.T_B):
            recs += [encode_matrix(t.A.data, t.q), encode_matrix(t.R, t.q, Tag.SIGNED)]
        return pack(Tag.MSK, {}, recs)
    if isinstance(obj, ZqMatrix):
        return pack(Tag.NODE, {}, [encode_matrix(obj.data, obj.q)])
    if isinstance(obj, (Ciphertext, PartialCiphertext)):
        return dump_batch([obj])
    if not isinstance(obj, (UserSecretKey, TokenSet, UpdateKey, TransformKey)):
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if q is None:
        raise TypeError(f"{type(obj).__name__} needs the modulus q")
    if isinstance(obj, UserSecretKey):
        meta = {"id": obj.identity.hex(), "x": _ints(obj.x)}
        return pack(Tag.SK, meta, [encode_matrix(obj.Z, q, Tag.SIGNED)])
    if isinstance(obj, TokenSet):
        nodes = sorted(obj.entries)
        meta = {"id": obj.identity.hex(), "x": _ints(obj.x), "nodes": nodes}
        return pack(Tag.TOKEN, meta, [encode_matrix(obj.entries[v], q, Tag.SIGNED) for v in nodes])
    if isinstance(obj, UpdateKey):
        nodes = sorted(obj.entries)
        meta = {**_epoch_meta(obj.epoch), "nodes": nodes}
        return pack(Tag.UK, meta, [encode_matrix(obj.entries[v], q, Tag.SIGNED) for v in nodes])
    meta = {"id": obj.identity.hex(), "x": _ints(obj.x), "node": obj.node, **_epoch_meta(obj.epoch)}
    return pack(Tag.TK, meta, [encode_matrix(obj.Z1, q, Tag.SIGNED), encode_matrix(obj.Z2, q, Tag.SIGNED)])


def load(buf: bytes):
    tag, _, meta, arrays, q = unpack(buf)
    if tag == Tag.PARAMS:
        meta["frd_poly"] = tuple(meta["frd_poly"])
        return SysParams(**meta)
    if tag == Tag.PP:
        ell = meta["ell"]
        mats = [ZqMatrix(a, q) for a in arrays]
        A, B, C, D = mats[:4]
        return SrpePublicParams(A, B, C, D, tuple(mats[4:4 + ell]), tuple(mats[4 + ell:4 + 2 * ell]), mats[-1])
    if tag == Tag.MSK:
        T_A = GTrapdoor(ZqMatrix(arrays[0], q), arrays[1])
        T_B = GTrapdoor(ZqMatrix(arrays[2], q), arrays[3])
        return MasterSecret(T_A, T_B)
    if tag == Tag.NODE:
        return ZqMatrix(arrays[0], q)
    if tag == Tag.SK:
        return UserSecretKey(bytes.fromhex(meta["id"]), np.array(meta["x"], dtype=np.int64), arrays[0])
    if tag == Tag.TOKEN:
        entries = dict(zip(meta["nodes"], arrays))
        return TokenSet(bytes.fromhex(meta["id"]), np.array(meta["x"], dtype=np.int64), entries)
    if tag == Tag.UK:
        return UpdateKey(_epoch(meta), dict(zip(meta["nodes"], arrays)))
    if tag == Tag.TK:
        return TransformKey(bytes.fromhex(meta["id"]), np.array(meta["x"], dtype=np.int64), _epoch(meta),
                            int(meta["node"]), arrays[0], arrays[1])
    if tag in (Tag.CT, Tag.PCT):
        if meta["count"] != 1:
            raise WireError("file holds several ciphertexts; use load_batch")
        return _ciphertexts(tag, meta, arrays, q)[0]
    raise WireError(f"cannot load object tag {tag!r}")


def dump_batch(cts) -> bytes:
    """Several ciphertexts (or partial ciphertexts) of one epoch in one object.

    Used for multi-bit messages, which are encrypted bit by bit.
    """
    cts = list(cts)
    if not cts:
        raise WireError("empty batch")
    first = cts[0]
    if any(type(ct) is not type(first) or ct.epoch != first.epoch for ct in cts):
        raise WireError("a batch must hold one kind of ciphertext for one epoch")
    vs = []
    if isinstance(first, Ciphertext):
        tag, ell = Tag.CT, len(first.c1_i)
        for ct in cts:
            vs += [ct.c, ct.c1, *ct.c1_i, ct.c10, ct.c2, *ct.c2_i]
    else:
        tag, ell = Tag.PCT, len(first.c2_i)
        for ct in cts:
            vs += [ct.c, ct.c2, *ct.c2_i, ct.cbar]
    meta = {**_epoch_meta(first.epoch), "ell": ell, "count": len(cts)}
    return pack(tag, meta, _vecs(vs, first.c.q))


def _ciphertexts(tag, meta, arrays, q):
    ell, ep = meta["ell"], _epoch(meta)
    v = [ZqVector(a, q) for a in arrays]
    width = 2 * ell + 4 if tag == Tag.CT else ell + 3
    if len(v) != width * meta["count"]:
        raise WireError("ciphertext record count does not match")
    out = []
    for j in range(0, len(v), width):
        w = v[j:j + width]
        if tag == Tag.CT:
            out.append(Ciphertext(ep, w[0], w[1], tuple(w[2:2 + ell]), w[2 + ell], w[3 + ell],
                                  tuple(w[4 + ell:4 + 2 * ell])))
        else:
            out.append(PartialCiphertext(ep, w[0], w[1], tuple(w[2:2 + ell]), w[2 + ell]))
    return out


def load_batch(buf: bytes) -> list:
    tag, _, meta, arrays, q = unpack(buf)
    if tag not in (Tag.CT, Tag.PCT):
        raise WireError(f"expected a ciphertext, found {tag.name}")
    return _ciphertexts(tag, meta, arrays, q)
