"""Seeded, counter-addressable standard-normal draws.

Sample ``i`` of a stream always comes from the same Philox4x64-10 counter
block, so any sub-range of samples can be regenerated independently of how a
batch is partitioned across workers.  Normals are produced by Box-Muller from
53-bit uniforms in (0, 1].
"""

from __future__ import annotations

import numpy as np

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter value


def _blocks_per_sample(dim: int) -> int:
    pairs = (dim + 1) // 2
    return -(-2 * pairs // _WORDS_PER_BLOCK)


def _uniform_open0(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


def standard_normal(seed: int, count: int, dim: int, start: int = 0) -> np.ndarray:
    """Rows ``start..start+count-1`` of the noise stream, shape ``(count, dim)``."""
    if count < 0 or dim < 1 or start < 0:
        raise ValueError("count >= 0, dim >= 1 and start >= 0 required")
    bps = _blocks_per_sample(dim)
    bitgen = np.random.Philox(key=int(seed) & ((1 << 64) - 1), counter=start * bps)
    raw = bitgen.random_raw(count * bps * _WORDS_PER_BLOCK)
    raw = raw.reshape(count, bps * _WORDS_PER_BLOCK)
    pairs = (dim + 1) // 2
    u1 = _uniform_open0(raw[:, 0:2 * pairs:2])
    u2 = _uniform_open0(raw[:, 1:2 * pairs:2])
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty((count, 2 * pairs))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :dim]


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed (FNV-1a over the little-endian words)."""
    h = 0xCBF29CE484222325
    for word in (seed, *tags):
        for byte in int(word & ((1 << 64) - 1)).to_bytes(8, "little"):
            h ^= byte
            h = (h * 0x100000001B3) & ((1 << 64) - 1)
    return h
