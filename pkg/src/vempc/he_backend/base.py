"""Backend-neutral contract for slotwise approximate homomorphic arithmetic.

Every multiplication consumes one level.  Two roles are separated on
purpose: :class:`HeEvaluator` holds only public evaluation material, while
:class:`HeBackend` additionally encrypts and decrypts.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, CryptoError, LevelUnderflow


@dataclass(frozen=True)
class NoiseModel:
    """Per-primitive absolute slotwise error magnitudes."""

    e_enc: float = 0.0
    e_mult: float = 0.0
    e_rot: float = 0.0

    def __post_init__(self):
        if min(self.e_enc, self.e_mult, self.e_rot) < 0:
            raise ConfigurationError("noise magnitudes must be nonnegative")

    def as_tuple(self) -> tuple:
        return (self.e_enc, self.e_mult, self.e_rot)


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


class HeEvaluator(ABC):
    """Operations available to a party without the secret key."""

    slots: int
    depth: int
    name: str = "abstract"

    @abstractmethod
    def level_of(self, ct) -> int: ...

    @abstractmethod
    def drop_to_level(self, ct, level: int): ...

    @abstractmethod
    def add_ct(self, a, b): ...

    @abstractmethod
    def add_pt(self, a, v): ...

    @abstractmethod
    def add_const(self, a, c: float): ...

    @abstractmethod
    def mul_ct(self, a, b): ...

    @abstractmethod
    def mul_pt(self, a, v): ...

    @abstractmethod
    def mul_const(self, a, c: float): ...

    @abstractmethod
    def dot_pt(self, cts, vectors):
        """``sum_j cts[j] * vectors[j]`` as one depth-1 step."""

    @abstractmethod
    def rotate(self, a, steps: int): ...

    @abstractmethod
    def has_rotation(self, steps: int) -> bool: ...

    @abstractmethod
    def descriptor(self) -> bytes:
        """Canonical public description of the backend parameters (JSON)."""

    @abstractmethod
    def serialize_ct(self, ct) -> bytes: ...

    @abstractmethod
    def deserialize_ct(self, blob: bytes): ...

    def eval_poly(self, a, coeffs):
        """Horner evaluation of ``sum_k coeffs[k] x**k`` using every coefficient.

        The schedule is one constant multiplication followed by ``degree - 1``
        ciphertext multiplications, so it consumes ``degree`` levels even when
        the leading coefficient is zero.
        """
        coeffs = [float(c) for c in np.asarray(coeffs, dtype=float).reshape(-1)]
        if not coeffs:
            raise ConfigurationError("empty coefficient list")
        degree = len(coeffs) - 1
        if degree == 0:
            return self.add_const(self.mul_const(a, 0.0), coeffs[0])
        if self.level_of(a) < degree:
            raise LevelUnderflow(f"degree {degree} needs {degree} levels, have {self.level_of(a)}")
        y = self.add_const(self.mul_const(a, coeffs[degree]), coeffs[degree - 1])
        for k in range(degree - 2, -1, -1):
            y = self.add_const(self.mul_ct(y, a), coeffs[k])
        return y

    def sum_reduce_segments(self, a, stride: int):
        """Rotate-and-add so that slot ``k * stride`` holds the sum of segment ``k``."""
        if not _is_pow2(stride) or self.slots % stride:
            raise ConfigurationError(f"stride {stride} must be a power of two dividing {self.slots}")
        shift = stride // 2
        while shift >= 1:
            a = self.add_ct(a, self.rotate(a, shift))
            shift //= 2
        return a

    def required_rotations(self, stride: int) -> list:
        out, shift = [], stride // 2
        while shift >= 1:
            out.append(shift)
            shift //= 2
        return out


class HeBackend(HeEvaluator):
    """A key-holding backend: the client side of the protocol."""

    @abstractmethod
    def encrypt(self, v, level=None): ...

    @abstractmethod
    def decrypt(self, ct) -> np.ndarray:
        """Real slot values."""

    @abstractmethod
    def evaluator(self) -> HeEvaluator:
        """A separate object carrying public evaluation material only."""

    @abstractmethod
    def evaluation_blob(self) -> bytes:
        """Serialized public evaluation material for a remote evaluator."""

    @abstractmethod
    def primitive_bounds(self) -> tuple:
        """``(B_enc, B_mult, B_rot)`` in force for budget computations."""

    def _check_slots(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.slots:
            raise CryptoError(f"slot-count mismatch: got {v.size}, backend has {self.slots}")
        return v
