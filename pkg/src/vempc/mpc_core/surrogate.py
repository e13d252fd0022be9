"""Polynomial surrogates of the positive part ``[g]_+`` and the feasibility weight."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P

from ..errors import ConfigurationError, NumericalError

log = logging.getLogger(__name__)

GRID_POINTS = 1_000_000


def violation_score(g) -> np.ndarray:
    """Sum of positive parts over the last axis; zero exactly when feasible."""
    g = np.asarray(g, dtype=float)
    return np.maximum(g, 0.0).sum(axis=-1)


@dataclass(frozen=True)
class Surrogate:
    """Degree-``degree`` polynomial ``h(g) = sum_k coeffs[k] g**k`` on ``[-bound, bound]``.

    ``delta`` is the uniform error against ``[g]_+`` measured on a dense grid.
    """

    degree: int
    bound: float
    coeffs: np.ndarray
    delta: float

    def __call__(self, g) -> np.ndarray:
        return P.polyval(np.asarray(g, dtype=float), self.coeffs)

    def scaled(self, bound: float) -> "Surrogate":
        """Rescale via ``h^B(g) = B * h^1(g / B)`` applied relative to the current bound."""
        ratio = bound / self.bound
        k = np.arange(self.coeffs.size)
        return Surrogate(self.degree, float(bound), self.coeffs * ratio ** (1.0 - k),
                         float(self.delta * ratio))

    def lipschitz(self, radius: float) -> float:
        """Max of ``|h'|`` on ``[-radius, radius]``."""
        d1 = P.polyder(self.coeffs)
        if d1.size == 0:
            return 0.0
        candidates = [-radius, radius]
        d2 = P.polyder(d1)
        if d2.size and np.any(d2 != 0):
            for r in P.polyroots(d2) if d2.size > 1 else []:
                if abs(r.imag) < 1e-12 and abs(r.real) <= radius:
                    candidates.append(r.real)
        return float(np.max(np.abs(P.polyval(np.array(candidates), d1))))

    def shifted_coeffs(self) -> np.ndarray:
        """Coefficients with the constant term removed, so ``h(0) - c_0 = 0``."""
        c = np.array(self.coeffs, dtype=float)
        c[0] = 0.0
        return c

    def abs_coeff_sum(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))


def measure_delta(coeffs: np.ndarray, bound: float, points: int = GRID_POINTS) -> float:
    grid = np.linspace(-bound, bound, points)
    # the kink at 0 is where interpolants peak; make sure it is on the grid
    grid = np.append(grid, 0.0)
    return float(np.max(np.abs(np.maximum(grid, 0.0) - P.polyval(grid, coeffs))))


def _even_minimax_abs(k: int, tol: float = 1e-15, max_iter: int = 100) -> np.ndarray:
    """Coefficients ``a_0..a_k`` of the best uniform approximation of ``|x|``
    on ``[-1, 1]`` by ``sum_j a_j x**(2j)`` (Remez exchange on ``[0, 1]``)."""
    if k == 0:
        return np.array([0.5])
    n_ref = k + 2
    ref = np.sort(np.cos(np.pi * np.arange(n_ref) / (n_ref - 1)) * -0.5 + 0.5)
    grid = np.linspace(0.0, 1.0, 200_001)
    powers = 2 * np.arange(k + 1)
    coeffs = None
    for _ in range(max_iter):
        V = ref[:, None] ** powers[None, :]
        system = np.hstack([V, ((-1.0) ** np.arange(n_ref))[:, None]])
        sol = np.linalg.solve(system, ref)
        coeffs, level = sol[:-1], abs(sol[-1])
        err = grid - (grid[:, None] ** powers[None, :]) @ coeffs
        # one extremum per maximal run of constant sign
        sign = np.sign(err)
        sign[sign == 0] = 1
        cuts = np.flatnonzero(np.diff(sign)) + 1
        runs = np.split(np.arange(grid.size), cuts)
        extrema = np.array([r[np.argmax(np.abs(err[r]))] for r in runs])
        while extrema.size > n_ref:
            vals = np.abs(err[extrema])
            drop = 0 if vals[0] < vals[-1] else extrema.size - 1
            extrema = np.delete(extrema, drop)
        if extrema.size < n_ref:
            raise NumericalError("Remez exchange lost alternation")
        ref = grid[extrema]
        peak = np.max(np.abs(err))
        if peak - level <= tol + 1e-9 * level:
            break
    return coeffs


def chebyshev_fit(degree: int, bound: float = 1.0, method: str = "minimax") -> Surrogate:
    """Fit ``[g]_+`` on ``[-bound, bound]`` by a degree-``degree`` polynomial.

    ``method="minimax"`` returns the best uniform (Chebyshev) approximation;
    ``method="interpolate"`` interpolates at first-kind Chebyshev nodes.  Both
    fit the unit interval and are rescaled to ``bound``.
    """
    if int(degree) != degree or degree < 1:
        raise ConfigurationError("surrogate degree must be an integer >= 1")
    if not bound > 0:
        raise ConfigurationError("surrogate bound must be positive")
    degree = int(degree)
    if method == "minimax":
        # [g]_+ = g/2 + |g|/2; the best fit of |g| is even, the linear part is exact
        even = _even_minimax_abs(degree // 2)
        unit = np.zeros(degree + 1)
        unit[0:2 * even.size:2] = 0.5 * even
        unit[1] += 0.5
    elif method == "interpolate":
        cheb = C.chebinterpolate(lambda x: np.maximum(x, 0.0), degree)
        unit = C.cheb2poly(cheb)
        unit[3::2] = 0.0  # parity: these vanish analytically, drop round-off
    else:
        raise ConfigurationError(f"unknown fit method {method!r}")
    unit_sur = Surrogate(degree, 1.0, unit, measure_delta(unit, 1.0))
    return unit_sur if bound == 1.0 else unit_sur.scaled(float(bound))


def horner(coeffs, x) -> np.ndarray:
    """``sum_k coeffs[k] x**k`` by Horner's rule, leading coefficient first."""
    x = np.asarray(x, dtype=float)
    c = [float(v) for v in np.asarray(coeffs, dtype=float).reshape(-1)]
    if len(c) == 1:
        return np.full_like(x, c[0])
    y = c[-1] * x + c[-2]
    for ck in reversed(c[:-2]):
        y = y * x + ck
    return y


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def segment_sum(v, stride: Optional[int] = None) -> np.ndarray:
    """Sum over the last axis by pairwise halving after zero-padding to ``stride``.

    This is the summation order of a rotate-and-add reduction, so plaintext
    and encrypted scores agree bit for bit when the arithmetic is exact.
    """
    v = np.asarray(v, dtype=float)
    stride = next_pow2(v.shape[-1]) if stride is None else int(stride)
    if stride < v.shape[-1] or stride & (stride - 1):
        raise ConfigurationError("stride must be a power of two covering the payload")
    pad = np.zeros(v.shape[:-1] + (stride,))
    pad[..., :v.shape[-1]] = v
    while pad.shape[-1] > 1:
        h = pad.shape[-1] // 2
        pad = pad[..., :h] + pad[..., h:]
    return pad[..., 0]


def surrogate_score(sur: Surrogate, g) -> np.ndarray:
    """``s_l = sum_j h(g_j)`` over the last axis.

    Evaluated as ``segment_sum(h(g) - c_0) + p c_0``, the same split the
    encrypted pipeline uses so that zero padding contributes exactly zero.
    """
    g = np.asarray(g, dtype=float)
    outside = np.abs(g) > sur.bound
    if np.any(outside):
        log.debug("%d residual entries outside the surrogate domain +-%.3g",
                  int(outside.sum()), sur.bound)
    body = horner(sur.shifted_coeffs(), g)
    return segment_sum(body) + g.shape[-1] * float(sur.coeffs[0])


@dataclass(frozen=True)
class WeightRule:
    tau: float = 0.0
    eta: float = 1e3

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError("threshold tau must be >= 0")
        if not self.eta > 0:
            raise ConfigurationError("sharpness eta must be > 0")


def threshold_weight(rule: WeightRule, score) -> tuple[np.ndarray, np.ndarray]:
    """Return the thresholded score ``max(s - tau, 0)`` and weight ``exp(-eta * that)``."""
    s_bar = np.maximum(np.asarray(score, dtype=float) - rule.tau, 0.0)
    return s_bar, np.exp(-rule.eta * s_bar)


def indicator_weight(residuals) -> np.ndarray:
    """Exact feasibility weight: 1 when every residual is <= 0, else 0."""
    return np.all(np.asarray(residuals) <= 0.0, axis=-1).astype(float)
