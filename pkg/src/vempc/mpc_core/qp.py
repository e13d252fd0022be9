"""Dense ADMM solver for the condensed QP, used as an exact-optimum oracle.

Solves ``min 1/2 U'HU + q'U  s.t.  G U <= h`` with the OSQP splitting
(``z = G U``, ``z <= h``) and residual-balanced step-size updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import QpInfeasible, QpNotConverged
from .model import CondensedQp, LinearConstraints


@dataclass(frozen=True)
class QpResult:
    U: np.ndarray
    dual: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float


def solve_qp(H, q, G, h, tol: float = 1e-8, max_iter: int = 100_000,
             rho: float = 0.1, sigma: float = 1e-6, alpha: float = 1.6,
             check_every: int = 10, adapt_every: int = 50) -> QpResult:
    H = np.asarray(H, dtype=float)
    q = np.asarray(q, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    d = H.shape[0]
    x = np.zeros(d)
    z = np.minimum(G @ x, h)
    y = np.zeros(G.shape[0])
    GtG = G.T @ G

    def factor(r):
        return scipy.linalg.cho_factor(H + sigma * np.eye(d) + r * GtG)

    fac = factor(rho)
    r_prim = r_dual = np.inf
    for it in range(1, max_iter + 1):
        x_t = scipy.linalg.cho_solve(fac, sigma * x - q + G.T @ (rho * z - y))
        z_t = G @ x_t
        x = alpha * x_t + (1 - alpha) * x
        z_relax = alpha * z_t + (1 - alpha) * z
        z_new = np.minimum(z_relax + y / rho, h)
        dy = rho * (z_relax - z_new)
        y = y + dy
        z = z_new

        if it % check_every:
            continue
        Gx = G @ x
        Gty = G.T @ y
        Hx = H @ x
        r_prim = float(np.max(np.abs(Gx - z), initial=0.0))
        r_dual = float(np.max(np.abs(Hx + q + Gty)))
        if r_prim <= tol and r_dual <= tol:
            return QpResult(x, np.maximum(y, 0.0), it, r_prim, r_dual)
        # primal infeasibility certificate: dy >= 0, G'dy ~ 0, h'dy < 0
        ndy = float(np.max(np.abs(dy)))
        if ndy > 0 and np.max(np.abs(G.T @ dy)) <= 1e-9 * ndy and h @ dy < -1e-9 * ndy:
            raise QpInfeasible("constraint set G U <= h is empty")
        if it % adapt_every == 0:
            p_rel = r_prim / max(np.max(np.abs(Gx)), np.max(np.abs(z)), 1e-30)
            d_rel = r_dual / max(np.max(np.abs(Hx)), np.max(np.abs(Gty)),
                                 np.max(np.abs(q)), 1e-30)
            ratio = np.sqrt(p_rel / max(d_rel, 1e-30))
            new_rho = float(np.clip(rho * ratio, 1e-6, 1e6))
            if new_rho > 5 * rho or new_rho < 0.2 * rho:
                rho = new_rho
                fac = factor(rho)
    raise QpNotConverged("ADMM iteration cap reached", max_iter, r_prim, r_dual, x)


def reference_qp_solve(qp: CondensedQp, constraints: LinearConstraints, x0,
                       tol: float = 1e-8, max_iter: int = 100_000) -> QpResult:
    x0 = np.asarray(x0, dtype=float)
    return solve_qp(qp.H, qp.S.T @ x0, constraints.G, constraints.h(x0),
                    tol=tol, max_iter=max_iter)


def kkt_residuals(H, q, G, h, U, dual) -> dict:
    """Stationarity, primal feasibility and complementarity residuals (inf-norms)."""
    U = np.asarray(U)
    dual = np.asarray(dual)
    slack = G @ U - h
    return {
        "stationarity": float(np.max(np.abs(H @ U + q + G.T @ dual))),
        "primal": float(max(np.max(slack), 0.0)),
        "complementarity": float(np.max(np.abs(dual * slack))),
        "dual_sign": float(max(-np.min(dual), 0.0)),
    }
