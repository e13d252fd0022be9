"""Negacyclic number-theoretic transform over stacks of word-sized prime limbs.

All primes are below 2**31 so that every product of two residues fits in an
unsigned 64-bit word.  Twiddle multiplications use Shoup's precomputed
quotients (32-bit), so the butterflies need no integer division; the loops
are compiled with numba.  Forward transforms are Cooley-Tukey with
bit-reversed output, inverses are Gentleman-Sande, following the merged-twist
formulation for ``X^N + 1``.
"""

from __future__ import annotations

from functools import lru_cache

import numba as nb
import numpy as np

MAX_PRIME_BITS = 31
_U32 = np.uint64(32)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def find_primes(bits: float, count: int, ring_dim: int, exclude=(), below: bool = True,
                max_bits: int = MAX_PRIME_BITS) -> list[int]:
    """``count`` primes ``q = 1 mod 2N`` nearest to ``2**bits``, alternating sides.

    With ``below=True`` only primes under ``2**bits`` are returned (largest first).
    """
    step = 2 * ring_dim
    target = int(round(2 ** bits))
    limit = 1 << max_bits
    found: list[int] = []
    exclude = set(exclude)
    base = target - (target % step) + 1
    lo, hi = base, base + step
    while len(found) < count:
        cands = [lo] if below else [lo, hi]
        for c in sorted(cands, key=lambda v: abs(v - target)):
            if len(found) < count and 0 < c < limit and c not in exclude and is_prime(c):
                if not below or c < target:
                    found.append(c)
        lo -= step
        hi += step
        if lo <= step:
            raise ValueError("ran out of NTT-friendly primes")
    return found


def _primitive_root_2n(q: int, two_n: int) -> int:
    if (q - 1) % two_n:
        raise ValueError(f"prime {q} is not 1 mod {two_n}")
    factors = []
    m, f = q - 1, 2
    while f * f <= m:
        if m % f == 0:
            factors.append(f)
            while m % f == 0:
                m //= f
        f += 1
    if m > 1:
        factors.append(m)
    for g in range(2, q):
        if all(pow(g, (q - 1) // f, q) != 1 for f in factors):
            return pow(g, (q - 1) // two_n, q)
    raise ValueError("no generator found")


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class NttTable:
    """Twiddle tables for one prime and ring dimension ``N``."""

    def __init__(self, q: int, n: int):
        if q >= 1 << MAX_PRIME_BITS:
            raise ValueError(f"prime {q} exceeds {MAX_PRIME_BITS} bits")
        if (q - 1) % (2 * n):
            raise ValueError(f"prime {q} is not NTT-friendly for N={n}")
        self.q = q
        self.n = n
        psi = _primitive_root_2n(q, 2 * n)
        psi_inv = pow(psi, q - 2, q)
        rev = _bit_reverse(n)
        pw = [1] * n
        pw_inv = [1] * n
        for i in range(1, n):
            pw[i] = pw[i - 1] * psi % q
            pw_inv[i] = pw_inv[i - 1] * psi_inv % q
        self.psi = psi
        self.fwd = np.array(pw, dtype=np.uint64)[rev]
        self.inv = np.array(pw_inv, dtype=np.uint64)[rev]
        self.fwd_shoup = np.array([(int(w) << 32) // q for w in self.fwd], dtype=np.uint64)
        self.inv_shoup = np.array([(int(w) << 32) // q for w in self.inv], dtype=np.uint64)
        self.n_inv = pow(n, q - 2, q)


class NttStack:
    """Transforms for a fixed ordered list of primes, applied to ``(rows, N)`` arrays."""

    def __init__(self, primes, n: int):
        self.primes = tuple(int(q) for q in primes)
        self.n = n
        tables = [_table(q, n) for q in self.primes]
        self.q = np.array(self.primes, dtype=np.uint64)[:, None]
        self.fwd = np.stack([t.fwd for t in tables])
        self.fwd_shoup = np.stack([t.fwd_shoup for t in tables])
        self.inv = np.stack([t.inv for t in tables])
        self.inv_shoup = np.stack([t.inv_shoup for t in tables])
        self.n_inv = np.array([t.n_inv for t in tables], dtype=np.uint64)[:, None]
        self.n_inv_shoup = np.array([(t.n_inv << 32) // t.q for t in tables],
                                    dtype=np.uint64)[:, None]

    def subset(self, rows) -> "NttStack":
        return ntt_stack(tuple(self.primes[r] for r in rows), self.n)

    def forward(self, a: np.ndarray) -> np.ndarray:
        x = np.array(a, dtype=np.uint64, order="C", copy=True)
        _forward_kernel(x, self.fwd, self.fwd_shoup, self.q[:, 0])
        return x

    def inverse(self, a: np.ndarray) -> np.ndarray:
        x = np.array(a, dtype=np.uint64, order="C", copy=True)
        _inverse_kernel(x, self.inv, self.inv_shoup, self.q[:, 0],
                        self.n_inv[:, 0], self.n_inv_shoup[:, 0])
        return x


@nb.njit(cache=True, nogil=True)
def _forward_kernel(x, tw, tw_shoup, qs):
    rows, n = x.shape
    for r in range(rows):
        q = qs[r]
        m = 1
        t = n >> 1
        while m < n:
            for i in range(m):
                w = tw[r, m + i]
                ws = tw_shoup[r, m + i]
                j1 = 2 * i * t
                for j in range(j1, j1 + t):
                    u = x[r, j]
                    a = x[r, j + t]
                    v = a * w - ((a * ws) >> _U32) * q
                    if v >= q:
                        v -= q
                    s = u + v
                    if s >= q:
                        s -= q
                    d = u + q - v
                    if d >= q:
                        d -= q
                    x[r, j] = s
                    x[r, j + t] = d
            m <<= 1
            t >>= 1


@nb.njit(cache=True, nogil=True)
def _inverse_kernel(x, tw, tw_shoup, qs, n_inv, n_inv_shoup):
    rows, n = x.shape
    for r in range(rows):
        q = qs[r]
        m = n >> 1
        t = 1
        while m >= 1:
            for i in range(m):
                w = tw[r, m + i]
                ws = tw_shoup[r, m + i]
                j1 = 2 * i * t
                for j in range(j1, j1 + t):
                    u = x[r, j]
                    v = x[r, j + t]
                    s = u + v
                    if s >= q:
                        s -= q
                    a = u + q - v
                    d = a * w - ((a * ws) >> _U32) * q
                    if d >= q:
                        d -= q
                    x[r, j] = s
                    x[r, j + t] = d
            m >>= 1
            t <<= 1
        ni = n_inv[r]
        nis = n_inv_shoup[r]
        for j in range(n):
            a = x[r, j]
            v = a * ni - ((a * nis) >> _U32) * q
            if v >= q:
                v -= q
            x[r, j] = v


@lru_cache(maxsize=None)
def _table(q: int, n: int) -> NttTable:
    return NttTable(q, n)


@lru_cache(maxsize=None)
def ntt_stack(primes: tuple, n: int) -> NttStack:
    return NttStack(primes, n)

