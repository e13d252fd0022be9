"""Closed-form exponential tilting of a Gaussian reference and sampling from it."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import ConfigurationError, NumericalError
from .model import CondensedQp, LinearConstraints
from .rng import standard_normal

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TiltedGaussian:
    """``N(m_U(x0), Sigma_U)`` obtained by tilting ``N(0, Sigma0)`` with ``exp(-J_Q/lam)``.

    ``mean_gain`` is the linear map ``x0 -> m_U(x0) = -(1/lam) Sigma_U S' x0``.
    ``Gamma = G L_U`` maps unit noise to residual perturbations.
    """

    Sigma0: np.ndarray
    lam: float
    Sigma_U: np.ndarray
    L_U: np.ndarray
    Gamma: np.ndarray
    mean_gain: np.ndarray
    constraints: LinearConstraints

    @property
    def dim(self) -> int:
        return self.Sigma_U.shape[0]

    @property
    def p(self) -> int:
        return self.Gamma.shape[0]

    def mean(self, x0) -> np.ndarray:
        return self.mean_gain @ np.asarray(x0, dtype=float)

    def offset(self, x0) -> np.ndarray:
        """``b(x0) = G m_U(x0) - h(x0)``."""
        return self.constraints.G @ self.mean(x0) - self.constraints.h(x0)

    def log_density(self, U, x0) -> float:
        diff = np.asarray(U, dtype=float) - self.mean(x0)
        z = scipy.linalg.solve_triangular(self.L_U, diff, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(self.L_U)))
        return float(-0.5 * z @ z - 0.5 * logdet - 0.5 * self.dim * np.log(2 * np.pi))


def _cholesky_with_jitter(M: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(M) / M.shape[0]
        log.warning("Cholesky failed; retrying once with jitter %.3e", jitter)
        try:
            return np.linalg.cholesky(M + jitter * np.eye(M.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("Sigma_U is not positive definite") from exc


def tilt(qp: CondensedQp, constraints: LinearConstraints, Sigma0, lam: float) -> TiltedGaussian:
    if lam <= 0:
        raise ConfigurationError("temperature lam must be positive")
    d = qp.dim
    Sigma0 = np.asarray(Sigma0, dtype=float)
    if Sigma0.ndim == 0:
        Sigma0 = float(Sigma0) * np.eye(d)
    if Sigma0.shape != (d, d):
        raise ConfigurationError(f"Sigma0 must be {d}x{d}, got {Sigma0.shape}")
    try:
        Sigma0_inv = scipy.linalg.solve(Sigma0, np.eye(d), assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("Sigma0 must be positive definite") from exc
    precision = Sigma0_inv + qp.H / lam
    precision = 0.5 * (precision + precision.T)
    Sigma_U = scipy.linalg.solve(precision, np.eye(d), assume_a="pos")
    Sigma_U = 0.5 * (Sigma_U + Sigma_U.T)
    L_U = _cholesky_with_jitter(Sigma_U)
    Gamma = constraints.G @ L_U
    mean_gain = -(1.0 / lam) * Sigma_U @ qp.S.T
    return TiltedGaussian(Sigma0=Sigma0, lam=float(lam), Sigma_U=Sigma_U, L_U=L_U,
                          Gamma=Gamma, mean_gain=mean_gain, constraints=constraints)


@dataclass(frozen=True)
class SampleBatch:
    """Samples ``U_i = m_U(x0) + L_U xi_i`` with their residuals ``b(x0) + Gamma xi_i``."""

    seed: int
    xi: np.ndarray
    U: np.ndarray
    residuals: np.ndarray
    mean: np.ndarray
    offset: np.ndarray

    @property
    def K(self) -> int:
        return self.xi.shape[0]


def column_products(M: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Rows ``M @ xi_i`` accumulated column by column, ``sum_j M[:, j] xi_ij``.

    The fixed left-to-right order matches the encrypted column/broadcast
    product, which makes noiseless encrypted runs reproducible bit for bit.
    """
    acc = np.zeros((xi.shape[0], M.shape[0]))
    for j in range(M.shape[1]):
        acc = acc + M[:, j][None, :] * xi[:, j:j + 1]
    return acc


def samples_from_noise(tg: TiltedGaussian, x0, xi: np.ndarray, seed: int = -1) -> SampleBatch:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    mean = tg.mean(x0)
    offset = tg.offset(x0)
    return SampleBatch(seed=seed, xi=xi, U=mean + column_products(tg.L_U, xi),
                       residuals=offset + column_products(tg.Gamma, xi), mean=mean, offset=offset)


def sample_tilted(tg: TiltedGaussian, x0, K: int, seed: int) -> SampleBatch:
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    xi = standard_normal(seed, K, tg.dim)
    return samples_from_noise(tg, x0, xi, seed)
