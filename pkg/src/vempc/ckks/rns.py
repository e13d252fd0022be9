"""Element-wise modular arithmetic on ``(limbs, N)`` residue stacks.

Residues are ``uint64`` below primes of at most 31 bits, so a single product
fits in a machine word.  ``q`` is always the per-limb modulus vector.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def _mul(a, b, q, out):
    rows, n = a.shape
    for r in range(rows):
        qr = q[r]
        for j in range(n):
            out[r, j] = (a[r, j] * b[r, j]) % qr


@nb.njit(cache=True, nogil=True)
def _mul_acc(acc, a, b, q):
    rows, n = a.shape
    for r in range(rows):
        qr = q[r]
        for j in range(n):
            acc[r, j] = (acc[r, j] + a[r, j] * b[r, j]) % qr


@nb.njit(cache=True, nogil=True)
def _mul_scalar(a, s, q, out):
    rows, n = a.shape
    for r in range(rows):
        qr = q[r]
        sr = s[r]
        for j in range(n):
            out[r, j] = (a[r, j] * sr) % qr


@nb.njit(cache=True, nogil=True)
def _add(a, b, q, out):
    rows, n = a.shape
    for r in range(rows):
        qr = q[r]
        for j in range(n):
            v = a[r, j] + b[r, j]
            out[r, j] = v - qr if v >= qr else v


@nb.njit(cache=True, nogil=True)
def _sub(a, b, q, out):
    rows, n = a.shape
    for r in range(rows):
        qr = q[r]
        for j in range(n):
            v = a[r, j] + qr - b[r, j]
            out[r, j] = v - qr if v >= qr else v


@nb.njit(cache=True, nogil=True)
def _centered_to_limbs(x, qsrc, q, out):
    """Lift residues mod ``qsrc`` (centered) into every modulus of ``q``."""
    half = qsrc >> np.uint64(1)
    rows = q.shape[0]
    n = x.shape[0]
    for j in range(n):
        v = x[j]
        neg = v > half
        mag = qsrc - v if neg else v
        for r in range(rows):
            m = mag % q[r]
            out[r, j] = (q[r] - m) % q[r] if neg else m


@nb.njit(cache=True, nogil=True)
def _crt2_centered_to_limbs(a0, a1, p0, p1, p0_inv_mod_p1, q, out):
    """Exact CRT of two residues to a centered integer, reduced into ``q``."""
    prod = p0 * p1
    half = prod >> np.uint64(1)
    rows = q.shape[0]
    n = a0.shape[0]
    for j in range(n):
        x0 = a0[j]
        t = ((a1[j] + p1 - x0 % p1) % p1) * p0_inv_mod_p1 % p1
        v = x0 + p0 * t
        neg = v > half
        mag = prod - v if neg else v
        for r in range(rows):
            m = mag % q[r]
            out[r, j] = (q[r] - m) % q[r] if neg else m


def _q(q) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(q, dtype=np.uint64).reshape(-1))


def mul(a, b, q):
    out = np.empty_like(a)
    _mul(a, b, _q(q), out)
    return out


def mul_acc(acc, a, b, q):
    """In-place ``acc += a * b``."""
    _mul_acc(acc, a, b, _q(q))
    return acc


def mul_scalar(a, s, q):
    """Multiply limb ``r`` by the residue ``s[r]``."""
    out = np.empty_like(a)
    _mul_scalar(a, _q(s), _q(q), out)
    return out


def add(a, b, q):
    out = np.empty_like(a)
    _add(a, b, _q(q), out)
    return out


def sub(a, b, q):
    out = np.empty_like(a)
    _sub(a, b, _q(q), out)
    return out


def neg(a, q):
    return sub(np.zeros_like(a), a, q)


def lift_centered(x, qsrc: int, q) -> np.ndarray:
    """Residues of the centered representative of ``x mod qsrc`` in each of ``q``."""
    q = _q(q)
    out = np.empty((q.size, x.shape[0]), dtype=np.uint64)
    _centered_to_limbs(np.ascontiguousarray(x), np.uint64(qsrc), q, out)
    return out


def lift_crt2(a0, a1, p0: int, p1: int, q) -> np.ndarray:
    q = _q(q)
    out = np.empty((q.size, a0.shape[0]), dtype=np.uint64)
    inv = pow(p0, -1, p1)
    _crt2_centered_to_limbs(np.ascontiguousarray(a0), np.ascontiguousarray(a1),
                            np.uint64(p0), np.uint64(p1), np.uint64(inv), q, out)
    return out


def reduce_signed(x, q) -> np.ndarray:
    """Signed integers (any shape ``(N,)``) to residues in each modulus."""
    x = np.asarray(x, dtype=np.int64)
    qi = np.asarray(q, dtype=np.int64).reshape(-1, 1)
    return np.mod(x[None, :], qi).astype(np.uint64)


def garner_to_float(residues, q) -> np.ndarray:
    """Centered CRT reconstruction as float64.

    Mixed-radix digits are computed exactly for both ``x`` and ``Q - x``; the
    representative with the shorter expansion is evaluated, so small values
    come out exact even when ``Q`` spans hundreds of bits.
    """
    q = [int(v) for v in q]
    residues = np.asarray(residues, dtype=np.uint64)
    if len(q) == 1:
        x = residues[0].astype(np.int64)
        return np.where(x > q[0] // 2, x - q[0], x).astype(float)
    neg_res = np.stack([(np.uint64(qi) - r) % np.uint64(qi) for r, qi in zip(residues, q)])

    def digits(res):
        out = [res[0].copy()]
        for i in range(1, len(q)):
            qi = np.uint64(q[i])
            t = res[i].copy()
            for j in range(i):
                inv = np.uint64(pow(q[j], -1, q[i]))
                t = ((t + qi - out[j] % qi) % qi) * inv % qi
            out.append(t)
        return out

    def evaluate(ds):
        val = np.zeros(residues.shape[1])
        for i in range(len(q) - 1, -1, -1):
            val = val * float(q[i]) + ds[i].astype(float)
        return val

    pos = digits(residues)
    negd = digits(neg_res)
    # the larger representative has a nonzero top digit; compare top-down
    use_neg = np.zeros(residues.shape[1], dtype=bool)
    decided = np.zeros(residues.shape[1], dtype=bool)
    for i in range(len(q) - 1, -1, -1):
        gt = (pos[i] > negd[i]) & ~decided
        lt = (pos[i] < negd[i]) & ~decided
        use_neg |= gt
        decided |= gt | lt
    return np.where(use_neg, -evaluate(negd), evaluate(pos))
