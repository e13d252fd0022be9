"""Canonical-embedding encoder for power-of-two cyclotomics.

Slot ``j`` is the evaluation of the message polynomial at ``zeta**(5**j mod 2N)``
with ``zeta = exp(i pi / N)``; the conjugate slots are implied, so a real
coefficient vector carries ``N/2`` complex values.  Both directions reduce to
one length-``N`` FFT after twisting by powers of ``zeta``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _tables(n: int):
    slots = n // 2
    exps = np.empty(slots, dtype=np.int64)
    e = 1
    for j in range(slots):
        exps[j] = e
        e = e * 5 % (2 * n)
    pos = (exps - 1) // 2              # FFT bin holding zeta**exps[j]
    conj_pos = (2 * n - exps - 1) // 2
    twist = np.exp(1j * np.pi * np.arange(n) / n)
    return pos, conj_pos, twist


def slot_exponents(n: int) -> np.ndarray:
    """Odd exponents ``5**j mod 2N`` addressed by slot ``j``."""
    pos, _, _ = _tables(n)
    return 2 * pos + 1


def embed(coeffs, n: int) -> np.ndarray:
    """Evaluate a real polynomial at the slot roots (the canonical embedding)."""
    pos, _, twist = _tables(n)
    full = n * np.fft.ifft(np.asarray(coeffs, dtype=float) * twist)
    return full[pos]


def embed_inverse(values, n: int) -> np.ndarray:
    """Real coefficients whose embedding equals ``values`` (length ``N/2``)."""
    pos, conj_pos, twist = _tables(n)
    z = np.asarray(values, dtype=complex)
    if z.shape != (n // 2,):
        raise ValueError(f"expected {n // 2} slot values, got shape {z.shape}")
    full = np.empty(n, dtype=complex)
    full[pos] = z
    full[conj_pos] = np.conj(z)
    return np.real(np.fft.fft(full) / n / twist)


def encode_integer(values, n: int, scale: float) -> np.ndarray:
    """Scaled and rounded coefficients as signed 64-bit integers."""
    coeffs = np.rint(embed_inverse(values, n) * scale)
    peak = float(np.max(np.abs(coeffs), initial=0.0))
    if peak >= 2.0 ** 62:
        raise OverflowError(f"encoded coefficient {peak:.3e} exceeds 62 bits")
    return coeffs.astype(np.int64)
