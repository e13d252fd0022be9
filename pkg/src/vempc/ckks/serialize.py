"""Little-endian binary blobs for plaintexts, ciphertexts and keys.

Every blob starts with a 20-byte header::

    magic "VEMP" | version u16 | kind u8 | log2 N u8 | level u8 | limbs u8 |
    reserved u16 | scale f64

followed by the components, each ``limbs * N`` little-endian u64 residues
(one for plaintexts and secret keys, two for ciphertexts and public keys).
A relinearization key adds its digit count (u32) and stores the digits as
consecutive ``(b_i, a_i)`` component pairs.  A rotation key set adds its key
count (u32) and prefixes each key with its Galois element (u32) and digit
count (u32).  A secret key is followed by its N ternary coefficients as i8.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import SerializationError
from .scheme import (Ciphertext, EvaluationKeys, Plaintext, PublicKey, SecretKey,
                     SwitchingKey)

MAGIC = b"VEMP"
VERSION = 1
KIND_PLAINTEXT, KIND_CIPHERTEXT, KIND_PUBLIC, KIND_RELIN, KIND_ROTATION, KIND_SECRET = range(6)
_HEADER = struct.Struct("<4sHBBBBHd")
_U32 = struct.Struct("<I")
_LE_U64 = np.dtype("<u8")


def _header(kind, log_n, level, limbs, scale) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, kind, log_n, level, limbs, 0, float(scale))


def _arrays_bytes(arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype=_LE_U64).tobytes() for a in arrays)


def _log_n(a: np.ndarray) -> int:
    n = a.shape[-1]
    return n.bit_length() - 1


def dumps(obj) -> bytes:
    """Serialize a :class:`Plaintext`, :class:`Ciphertext` or key object."""
    if isinstance(obj, Plaintext):
        d = obj.data
        return _header(KIND_PLAINTEXT, _log_n(d), obj.level, d.shape[0], obj.scale) + _arrays_bytes([d])
    if isinstance(obj, Ciphertext):
        return (_header(KIND_CIPHERTEXT, _log_n(obj.c0), obj.level, obj.limbs, obj.scale)
                + _arrays_bytes([obj.c0, obj.c1]))
    if isinstance(obj, PublicKey):
        return (_header(KIND_PUBLIC, _log_n(obj.b), 0, obj.b.shape[0], 0.0)
                + _arrays_bytes([obj.b, obj.a]))
    if isinstance(obj, SecretKey):
        return (_header(KIND_SECRET, _log_n(obj.ntt), 0, obj.ntt.shape[0], 0.0)
                + _arrays_bytes([obj.ntt]) + obj.coeffs.astype(np.int8).tobytes())
    if isinstance(obj, SwitchingKey):
        return (_header(KIND_RELIN, _log_n(obj.b), 0, obj.b.shape[1], 0.0)
                + _U32.pack(obj.digits) + _key_bytes(obj))
    if isinstance(obj, EvaluationKeys):
        return dump_rotation_keys(obj.rotations)
    raise SerializationError(f"cannot serialize {type(obj).__name__}")


def _key_bytes(key: SwitchingKey) -> bytes:
    return _arrays_bytes([m for i in range(key.digits) for m in (key.b[i], key.a[i])])


def dump_rotation_keys(rotations: dict) -> bytes:
    keys = [rotations[g] for g in sorted(rotations)]
    if keys:
        log_n, limbs = _log_n(keys[0].b), keys[0].b.shape[1]
    else:
        log_n, limbs = 0, 0
    parts = [_header(KIND_ROTATION, log_n, 0, limbs, 0.0) + _U32.pack(len(keys))]
    for k in keys:
        parts.append(_U32.pack(k.galois) + _U32.pack(k.digits) + _key_bytes(k))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, size: int) -> memoryview:
        if self.pos + size > len(self.buf):
            raise SerializationError("blob is truncated")
        out = self.buf[self.pos:self.pos + size]
        self.pos += size
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def arrays(self, count: int, limbs: int, n: int) -> list:
        raw = self.take(count * limbs * n * 8)
        flat = np.frombuffer(raw, dtype=_LE_U64).astype(np.uint64)
        return list(flat.reshape(count, limbs, n))


def loads(buf: bytes):
    """Inverse of :func:`dumps` (rotation key sets return a ``{galois: key}`` dict)."""
    obj, end = loads_prefix(buf)
    if end != len(buf):
        raise SerializationError(f"{len(buf) - end} trailing bytes after blob")
    return obj


def loads_prefix(buf: bytes, offset: int = 0):
    """Parse one blob starting at ``offset``; return ``(object, end_offset)``."""
    r = _Reader(buf)
    r.pos = offset
    magic, version, kind, log_n, level, limbs, _reserved, scale = _HEADER.unpack(
        r.take(_HEADER.size))
    if magic != MAGIC:
        raise SerializationError(f"bad magic {bytes(magic)!r}")
    if version != VERSION:
        raise SerializationError(f"unsupported version {version}")
    n = 1 << log_n
    if kind == KIND_PLAINTEXT:
        (d,) = r.arrays(1, limbs, n)
        obj = Plaintext(d, level, scale)
    elif kind == KIND_CIPHERTEXT:
        c0, c1 = r.arrays(2, limbs, n)
        obj = Ciphertext(c0, c1, level, scale)
    elif kind == KIND_PUBLIC:
        b, a = r.arrays(2, limbs, n)
        obj = PublicKey(b, a)
    elif kind == KIND_SECRET:
        (s,) = r.arrays(1, limbs, n)
        coeffs = np.frombuffer(r.take(n), dtype=np.int8).copy()
        obj = SecretKey(coeffs, s)
    elif kind == KIND_RELIN:
        obj = _read_key(r, 0, r.u32(), limbs, n)
    elif kind == KIND_ROTATION:
        obj = {}
        for _ in range(r.u32()):
            galois = r.u32()
            digits = r.u32()
            obj[galois] = _read_key(r, galois, digits, limbs, n)
    else:
        raise SerializationError(f"unknown blob kind {kind}")
    return obj, r.pos


def _read_key(r: _Reader, galois: int, digits: int, limbs: int, n: int) -> SwitchingKey:
    mats = r.arrays(2 * digits, limbs, n)
    return SwitchingKey(np.stack(mats[0::2]), np.stack(mats[1::2]), galois)


def dump_evaluation_keys(keys: EvaluationKeys) -> bytes:
    """Relinearization key blob followed by the rotation key set blob."""
    return dumps(keys.relin) + dump_rotation_keys(keys.rotations)


def load_evaluation_keys(buf: bytes) -> EvaluationKeys:
    relin, end = loads_prefix(buf)
    rotations, end = loads_prefix(buf, end)
    if not isinstance(relin, SwitchingKey) or not isinstance(rotations, dict):
        raise SerializationError("expected a relinearization key and a rotation key set")
    if end != len(buf):
        raise SerializationError("trailing bytes after evaluation keys")
    return EvaluationKeys(relin, rotations)
