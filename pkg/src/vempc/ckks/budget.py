"""Worst-case error budgets for the encrypted pipeline.

Primitive bounds (fresh encryption, one multiplication with rescale, one
rotation) are either supplied or measured with :func:`calibrate_primitives`.
The derived bounds compose them:

* product of two encryptions: ``(a + b) B_enc + B_enc**2 + B_mult``
* degree-``l`` polynomial:    ``l B_mult max(1, |x|)**(l-1) sum_k |c_k|``
* sample trajectory:          ``B_enc + Nm (B_prod(|L_U|, |xi|) + B_rot)``
* surrogate score:            ``p B_rot + B_poly + L_h B_U``
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ErrorBudget:
    B_enc: float
    B_mult: float
    B_rot: float
    B_prod: float = 0.0
    B_poly: float = 0.0
    B_U: float = 0.0
    B_s: float = 0.0
    L_h: float = 0.0

    def __post_init__(self):
        if min(self.B_enc, self.B_mult, self.B_rot) < 0:
            raise ValueError("primitive error bounds must be nonnegative")

    def product(self, norm_a: float, norm_b: float) -> float:
        return (norm_a + norm_b) * self.B_enc + self.B_enc ** 2 + self.B_mult

    def poly(self, coeffs, degree: int, input_norm: float) -> float:
        coeffs = np.asarray(coeffs, dtype=float)
        return float(degree * self.B_mult * max(1.0, input_norm) ** (degree - 1)
                     * np.sum(np.abs(coeffs)))

    def scaled(self, factor: float) -> "ErrorBudget":
        """Same structure with every primitive bound multiplied by ``factor``."""
        return replace(self, B_enc=self.B_enc * factor, B_mult=self.B_mult * factor,
                       B_rot=self.B_rot * factor)


def compute_budget(primitives, dims, surrogate, norm_LU: float, norm_xi: float,
                   input_norm: Optional[float] = None,
                   lipschitz: Optional[float] = None) -> ErrorBudget:
    """Derive all bounds from primitive bounds.

    Parameters
    ----------
    primitives : ErrorBudget or tuple
        ``(B_enc, B_mult, B_rot)``.
    dims : tuple
        ``(N, m, p)``: horizon, input dimension, constraint count.
    surrogate : Surrogate
        Polynomial whose evaluation is budgeted.
    norm_LU, norm_xi : float
        Max-abs entries of ``L_U`` and of the noise draws.
    input_norm : float, optional
        Bound on the residual entries fed to the polynomial; defaults to the
        surrogate domain bound.
    lipschitz : float, optional
        Lipschitz constant of the surrogate; by default measured on the
        domain inflated by ``B_U``.
    """
    if not isinstance(primitives, ErrorBudget):
        primitives = ErrorBudget(*map(float, primitives))
    N, m, p = dims
    nm = N * m
    base = ErrorBudget(primitives.B_enc, primitives.B_mult, primitives.B_rot)
    b_prod = base.product(norm_LU, norm_xi)
    b_u = base.B_enc + nm * (b_prod + base.B_rot)
    x_norm = surrogate.bound if input_norm is None else float(input_norm)
    b_poly = base.poly(surrogate.coeffs, surrogate.degree, x_norm)
    L_h = surrogate.lipschitz(x_norm + b_u) if lipschitz is None else float(lipschitz)
    b_s = p * base.B_rot + b_poly + L_h * b_u
    return replace(base, B_prod=b_prod, B_poly=b_poly, B_U=b_u, B_s=b_s, L_h=L_h)


def calibrate_primitives(backend, trials: int = 8, seed: int = 0, level: Optional[int] = None,
                         safety: float = 2.0) -> ErrorBudget:
    """Measure ``(B_enc, B_mult, B_rot)`` on random unit-box slot vectors.

    Each bound is ``safety`` times the largest slotwise error seen.  The
    multiplication error is taken against the product of the decrypted
    inputs and the rotation error against the rotated decryption, so
    encryption noise is not double counted.
    """
    rng = np.random.default_rng(seed)
    slots = backend.slots
    level = backend.depth if level is None else level
    e_enc = e_mult = e_rot = 0.0
    for t in range(trials):
        v = rng.uniform(-1.0, 1.0, slots)
        w = rng.uniform(-1.0, 1.0, slots)
        a = backend.encrypt(v, level=level)
        b = backend.encrypt(w, level=level)
        da, db = backend.decrypt(a), backend.decrypt(b)
        e_enc = max(e_enc, float(np.max(np.abs(da - v))), float(np.max(np.abs(db - w))))
        prod = backend.decrypt(backend.mul_ct(a, b))
        e_mult = max(e_mult, float(np.max(np.abs(prod - da * db))))
        shift = 1 << (t % max(1, min(6, slots.bit_length() - 1)))
        if backend.has_rotation(shift):
            rot = backend.decrypt(backend.rotate(a, shift))
            e_rot = max(e_rot, float(np.max(np.abs(rot - np.roll(da, -shift)))))
    return ErrorBudget(safety * e_enc, safety * e_mult, safety * e_rot)
