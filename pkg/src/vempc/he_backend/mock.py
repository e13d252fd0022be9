"""Noisy plaintext stand-in for the HE engine.

A mock ciphertext is the slot vector itself plus bookkeeping.  Each
encryption, multiplication and rotation adds uniform noise in ``[-e, e]``
per slot, drawn from a generator keyed by the operation and the lineage of
its inputs.  Results are therefore reproducible and independent of the order
or thread in which operations run.  With zero noise every operation is exact
floating-point arithmetic.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CryptoError, LevelUnderflow, SerializationError
from .base import HeBackend, HeEvaluator, NoiseModel

_MAGIC = b"VEMK"
_HEAD = struct.Struct("<4sBB16s")


@dataclass(frozen=True, eq=False)
class MockCiphertext:
    values: np.ndarray
    level: int
    tag: bytes


def _tag(*parts) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype=np.float64).tobytes())
        elif isinstance(p, bytes):
            h.update(p)
        else:
            h.update(repr(p).encode())
        h.update(b"|")
    return h.digest()


class MockEvaluator(HeEvaluator):
    name = "mock"

    def __init__(self, slots: int = 4096, depth: int = 4, noise: NoiseModel = NoiseModel(),
                 seed: int = 0):
        self.slots = int(slots)
        self.depth = int(depth)
        self.noise = noise
        self.seed = int(seed)

    def _noisy(self, values: np.ndarray, magnitude: float, tag: bytes) -> np.ndarray:
        if magnitude == 0:
            return values
        rng = np.random.default_rng(int.from_bytes(tag, "little"))
        return values + rng.uniform(-magnitude, magnitude, values.shape)

    def _vec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.slots:
            raise CryptoError(f"slot-count mismatch: got {v.size}, backend has {self.slots}")
        return v

    def _consume(self, *cts) -> int:
        level = min(c.level for c in cts)
        if level < 1:
            raise LevelUnderflow("multiplicative depth exhausted")
        return level - 1

    def level_of(self, ct) -> int:
        return ct.level

    def drop_to_level(self, ct, level: int):
        if level > ct.level:
            raise LevelUnderflow(f"cannot raise level {ct.level} to {level}")
        return MockCiphertext(ct.values, level, ct.tag)

    def add_ct(self, a, b):
        return MockCiphertext(a.values + b.values, min(a.level, b.level), _tag("add", a.tag, b.tag))

    def add_pt(self, a, v):
        v = self._vec(v)
        return MockCiphertext(a.values + v, a.level, _tag("addp", a.tag, v))

    def add_const(self, a, c: float):
        return MockCiphertext(a.values + float(c), a.level, _tag("addc", a.tag, float(c)))

    def mul_ct(self, a, b):
        level = self._consume(a, b)
        tag = _tag("mul", a.tag, b.tag)
        return MockCiphertext(self._noisy(a.values * b.values, self.noise.e_mult, tag), level, tag)

    def mul_pt(self, a, v):
        v = self._vec(v)
        level = self._consume(a)
        tag = _tag("mulp", a.tag, v)
        return MockCiphertext(self._noisy(a.values * v, self.noise.e_mult, tag), level, tag)

    def mul_const(self, a, c: float):
        level = self._consume(a)
        tag = _tag("mulc", a.tag, float(c))
        return MockCiphertext(self._noisy(float(c) * a.values, self.noise.e_mult, tag), level, tag)

    def dot_pt(self, cts, vectors):
        if len(cts) != len(vectors) or not cts:
            raise CryptoError("need matching, nonempty ciphertext and vector lists")
        level = self._consume(*cts)
        acc = np.zeros(self.slots)
        parts = ["dot"]
        for c, v in zip(cts, vectors):
            v = self._vec(v)
            acc = acc + c.values * v
            parts += [c.tag, v]
        tag = _tag(*parts)
        return MockCiphertext(self._noisy(acc, self.noise.e_mult, tag), level, tag)

    def rotate(self, a, steps: int):
        tag = _tag("rot", a.tag, int(steps))
        out = np.roll(a.values, -int(steps))
        return MockCiphertext(self._noisy(out, self.noise.e_rot, tag), a.level, tag)

    def has_rotation(self, steps: int) -> bool:
        return True

    def serialize_ct(self, ct) -> bytes:
        return _HEAD.pack(_MAGIC, 1, ct.level, ct.tag) + ct.values.astype("<f8").tobytes()

    def deserialize_ct(self, blob: bytes):
        if len(blob) < _HEAD.size:
            raise SerializationError("mock ciphertext is truncated")
        magic, _version, level, tag = _HEAD.unpack_from(blob)
        if magic != _MAGIC:
            raise SerializationError(f"bad magic {magic!r}")
        body = blob[_HEAD.size:]
        if len(body) != 8 * self.slots:
            raise SerializationError("mock ciphertext has the wrong slot count")
        return MockCiphertext(np.frombuffer(body, dtype="<f8").astype(float), level, tag)

    def descriptor(self) -> bytes:
        return json.dumps({"backend": "mock", "slots": self.slots, "depth": self.depth,
                           "noise": list(self.noise.as_tuple()), "seed": self.seed},
                          sort_keys=True).encode()


class MockBackend(MockEvaluator, HeBackend):
    """Mock with the client-side operations; the 'key' is just the noise seed."""

    def encrypt(self, v, level=None):
        v = self._vec(v)
        level = self.depth if level is None else int(level)
        tag = _tag("enc", self.seed, level, v)
        return MockCiphertext(self._noisy(v.copy(), self.noise.e_enc, tag), level, tag)

    def decrypt(self, ct) -> np.ndarray:
        return ct.values.copy()

    def evaluator(self) -> MockEvaluator:
        return MockEvaluator(self.slots, self.depth, self.noise, self.seed)

    def evaluation_blob(self) -> bytes:
        return self.descriptor()

    def primitive_bounds(self) -> tuple:
        return self.noise.as_tuple()


def mock_evaluator_from_blob(blob: bytes) -> MockEvaluator:
    d = json.loads(blob.decode())
    if d.get("backend") != "mock":
        raise SerializationError("not a mock evaluator descriptor")
    return MockEvaluator(d["slots"], d["depth"], NoiseModel(*d["noise"]), d["seed"])
