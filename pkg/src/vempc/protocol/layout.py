"""SIMD packing of many samples into one slot vector.

U-family vectors hold one length-``u_stride`` segment per sample and
residual-family vectors one length-``p_stride`` segment; sample ``k`` is
segment ``k`` in both families.  Payload beyond ``dim`` (resp. ``p``) inside a
segment, and every segment past ``capacity``, is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..mpc_core.surrogate import next_pow2


@dataclass(frozen=True)
class PackingLayout:
    slots: int
    dim: int
    p: int

    def __post_init__(self):
        if self.dim < 1 or self.p < 1:
            raise ConfigurationError("dim and p must be positive")
        if self.slots & (self.slots - 1):
            raise ConfigurationError("slot count must be a power of two")
        if self.capacity < 1:
            raise ConfigurationError(
                f"layout capacity exceeded: strides ({self.u_stride}, {self.p_stride}) "
                f"do not fit {self.slots} slots")

    @property
    def u_stride(self) -> int:
        return next_pow2(self.dim)

    @property
    def p_stride(self) -> int:
        return next_pow2(self.p)

    @property
    def capacity(self) -> int:
        """Samples per ciphertext, ``min(slots / u_stride, slots / p_stride)``."""
        return min(self.slots // self.u_stride, self.slots // self.p_stride)

    def _pack(self, rows: np.ndarray, stride: int, width: int) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        k, w = rows.shape
        if w != width:
            raise ConfigurationError(f"segment payload must have length {width}, got {w}")
        if k > self.capacity:
            raise ConfigurationError(f"{k} samples exceed layout capacity {self.capacity}")
        out = np.zeros(self.slots)
        view = out[:k * stride].reshape(k, stride)
        view[:, :width] = rows
        return out

    def replicate_u(self, vec, count: int = None) -> np.ndarray:
        count = self.capacity if count is None else count
        return self._pack(np.tile(np.asarray(vec, dtype=float), (count, 1)), self.u_stride, self.dim)

    def replicate_p(self, vec, count: int = None) -> np.ndarray:
        count = self.capacity if count is None else count
        return self._pack(np.tile(np.asarray(vec, dtype=float), (count, 1)), self.p_stride, self.p)

    def broadcast_u(self, scalars) -> np.ndarray:
        """Segment ``k`` payload filled with ``scalars[k]``."""
        s = np.asarray(scalars, dtype=float).reshape(-1, 1)
        return self._pack(np.repeat(s, self.dim, axis=1), self.u_stride, self.dim)

    def broadcast_p(self, scalars) -> np.ndarray:
        s = np.asarray(scalars, dtype=float).reshape(-1, 1)
        return self._pack(np.repeat(s, self.p, axis=1), self.p_stride, self.p)

    def pack_u(self, rows) -> np.ndarray:
        return self._pack(rows, self.u_stride, self.dim)

    def pack_p(self, rows) -> np.ndarray:
        return self._pack(rows, self.p_stride, self.p)

    def extract_u(self, values, count: int) -> np.ndarray:
        v = np.asarray(values)
        return v[:count * self.u_stride].reshape(count, self.u_stride)[:, :self.dim].copy()

    def extract_p(self, values, count: int) -> np.ndarray:
        v = np.asarray(values)
        return v[:count * self.p_stride].reshape(count, self.p_stride)[:, :self.p].copy()

    def extract_starts(self, values, count: int) -> np.ndarray:
        """Segment-start slots of the residual family (where reduced sums land)."""
        return np.asarray(values)[:count * self.p_stride:self.p_stride].copy()

    def reduction_rotations(self) -> list:
        return [self.p_stride >> r for r in range(1, self.p_stride.bit_length())]


def plan_batches(K: int, capacity: int, batches: int = None) -> list:
    """Split samples ``0..K-1`` into contiguous ``(start, count)`` worker-batches.

    ``batches`` defaults to the fewest that fit; it is raised if needed so that
    no batch exceeds ``capacity``.
    """
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    needed = -(-K // capacity)
    n = needed if batches is None else max(int(batches), needed)
    n = min(n, K)
    out, start = [], 0
    for chunk in np.array_split(np.arange(K), n):
        out.append((start, int(chunk.size)))
        start += int(chunk.size)
    return out
