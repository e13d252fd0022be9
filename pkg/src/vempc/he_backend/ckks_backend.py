"""The backend contract realized by the in-repo CKKS engine."""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from ..ckks import serialize
from ..ckks.budget import calibrate_primitives
from ..ckks.params import CkksParams
from ..ckks.scheme import (Ciphertext, CkksContext, Decryptor, Encryptor, EvaluationKeys,
                           Evaluator, KeyBundle, keygen)
from ..errors import CryptoError
from .base import HeBackend, HeEvaluator


class CkksEvaluator(HeEvaluator):
    """Evaluation with public keys only; never sees the secret key."""

    name = "ckks"

    def __init__(self, params: CkksParams, keys: EvaluationKeys,
                 ctx: Optional[CkksContext] = None):
        if not isinstance(keys, EvaluationKeys):
            raise TypeError("CkksEvaluator accepts EvaluationKeys only")
        self.params = params
        self.ctx = ctx or CkksContext(params)
        self._ev = Evaluator(self.ctx, keys)
        self.slots = params.slots
        self.depth = params.depth

    def _vec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.slots:
            raise CryptoError(f"slot-count mismatch: got {v.size}, backend has {self.slots}")
        return v

    def level_of(self, ct) -> int:
        return ct.level

    def drop_to_level(self, ct, level: int):
        return self._ev.drop_level(ct, level)

    def add_ct(self, a, b):
        return self._ev.add(a, b)

    def add_pt(self, a, v):
        return self._ev.add_plain(a, self.ctx.encode(self._vec(v), a.level, a.scale))

    def add_const(self, a, c: float):
        return self._ev.add_const(a, c)

    def mul_ct(self, a, b):
        return self._ev.multiply(a, b)

    def mul_pt(self, a, v):
        return self._ev.mul_plain(a, self._vec(v))

    def mul_const(self, a, c: float):
        return self._ev.mul_const(a, c)

    def dot_pt(self, cts, vectors):
        return self._ev.linear_combination_plain(list(cts), [self._vec(v) for v in vectors])

    def rotate(self, a, steps: int):
        return self._ev.rotate(a, steps)

    def has_rotation(self, steps: int) -> bool:
        steps %= self.slots
        return steps == 0 or self.ctx.galois_element(steps) in self._ev.keys.rotations

    def descriptor(self) -> bytes:
        return json.dumps({"backend": "ckks", "params": self.params.to_dict()},
                          sort_keys=True).encode()

    def serialize_ct(self, ct) -> bytes:
        return serialize.dumps(ct)

    def deserialize_ct(self, blob: bytes):
        ct = serialize.loads(blob)
        if not isinstance(ct, Ciphertext):
            raise CryptoError("blob does not hold a ciphertext")
        if ct.c0.shape != (self.ctx.limbs(ct.level), self.ctx.n):
            raise CryptoError("ciphertext shape does not match the parameters")
        return ct


class CkksBackend(CkksEvaluator, HeBackend):
    """Key owner: encrypts with the secret key and decrypts."""

    def __init__(self, params: CkksParams, seed: Optional[int] = None, rotations=(1,),
                 bounds: Optional[tuple] = None, keys: Optional[KeyBundle] = None):
        ctx = CkksContext(params)
        keys = keys or keygen(params, seed, rotations, ctx=ctx)
        super().__init__(params, keys.evaluation, ctx)
        self._keys = keys
        enc_seed = None if seed is None else seed + 1
        self._encryptor = Encryptor(ctx, keys.secret, enc_seed)
        self._decryptor = Decryptor(ctx, keys.secret)
        self._bounds = bounds

    @property
    def keys(self) -> KeyBundle:
        return self._keys

    def encrypt(self, v, level=None):
        level = self.depth if level is None else int(level)
        return self._encryptor.encrypt(self.ctx.encode(self._vec(v), level, self.params.scale))

    def decrypt(self, ct) -> np.ndarray:
        return np.real(self._decryptor.decrypt_values(ct))

    def evaluator(self) -> CkksEvaluator:
        return CkksEvaluator(self.params, self._keys.evaluation, self.ctx)

    def evaluation_blob(self) -> bytes:
        return serialize.dump_evaluation_keys(self._keys.evaluation)

    def primitive_bounds(self) -> tuple:
        if self._bounds is None:
            b = calibrate_primitives(self, trials=4, level=1)
            self._bounds = (b.B_enc, b.B_mult, b.B_rot)
        return self._bounds


def ckks_evaluator_from_blob(params: CkksParams, blob: bytes) -> CkksEvaluator:
    return CkksEvaluator(params, serialize.load_evaluation_keys(blob))
