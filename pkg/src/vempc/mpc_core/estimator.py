"""Self-normalized weighted estimators over trajectory samples."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import NoInformativeSamples

log = logging.getLogger(__name__)


def estimate(U, weights) -> np.ndarray:
    """``sum_i w_i U_i / sum_i w_i``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != U.shape[0]:
        raise ValueError(f"{w.size} weights for {U.shape[0]} samples")
    total = w.sum()
    if not total > 0:
        raise NoInformativeSamples("all sample weights are zero")
    return (w @ U) / total


def estimate_or_fallback(U, weights, fallback) -> tuple[np.ndarray, bool]:
    """Like :func:`estimate` but returns ``(fallback, True)`` on an all-zero batch."""
    try:
        return estimate(U, weights), False
    except NoInformativeSamples:
        log.warning("no informative samples; falling back to the tilted mean")
        return np.asarray(fallback, dtype=float).copy(), True


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    sq = float(np.sum(w * w))
    return float(w.sum() ** 2 / sq) if sq > 0 else 0.0


def ratio_standard_error(U, weights) -> np.ndarray:
    """Delta-method standard error of the self-normalized estimate, per coordinate."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    w = np.asarray(weights, dtype=float)
    K = w.size
    mean_w = w.mean()
    est = (w @ U) / w.sum()
    resid = w[:, None] * (U - est)
    return np.sqrt(np.sum(resid ** 2, axis=0) / (K * (K - 1))) / mean_w
