import numpy as np
import pytest

from conftest import random_system
from vempc.errors import QpInfeasible, QpNotConverged
from vempc.mpc_core import (build_constraints, condense_cost, kkt_residuals,
                            reference_qp_solve, solve_qp)


def test_scalar_active_bound():
    # min 2u^2 + 6u  s.t. |u| <= 1: unconstrained -1.5 is clipped to -1
    res = solve_qp([[4.0]], [6.0], [[1.0], [-1.0]], [1.0, 1.0])
    assert res.U[0] == pytest.approx(-1.0, abs=1e-7)


def test_inactive_constraints_give_unconstrained_optimum():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(4, 4))
    H = H @ H.T + np.eye(4)
    q = rng.normal(size=4)
    G = np.vstack([np.eye(4), -np.eye(4)])
    h = np.full(8, 100.0)
    res = solve_qp(H, q, G, h)
    np.testing.assert_allclose(res.U, -np.linalg.solve(H, q), atol=1e-6)


def test_pendulum_kkt(pendulum_design):
    d = pendulum_design
    x0 = np.array([0.3, 0.1])
    res = reference_qp_solve(d.qp, d.constraints, x0)
    h = d.constraints.h(x0)
    assert np.all(d.constraints.G @ res.U <= h + 1e-6)
    kkt = kkt_residuals(d.qp.H, d.qp.S.T @ x0, d.constraints.G, h, res.U, res.dual)
    assert kkt["stationarity"] <= 1e-6
    assert res.U[0] == pytest.approx(-1.0, abs=1e-6)


def test_random_systems_feasible_and_stationary():
    rng = np.random.default_rng(5)
    for _ in range(10):
        model, prob = random_system(rng, n=2, m=1, N=4)
        qp = condense_cost(model, prob)
        lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
        x0 = 0.1 * rng.normal(size=2)
        res = reference_qp_solve(qp, lc, x0)
        assert np.max(lc.residual(res.U, x0)) <= 1e-6
        assert res.primal_residual <= 1e-6


def test_infeasible_problem_detected():
    G = np.array([[1.0], [-1.0]])
    h = np.array([-1.0, -1.0])  # u <= -1 and u >= 1
    with pytest.raises((QpInfeasible, QpNotConverged)):
        solve_qp([[1.0]], [0.0], G, h, max_iter=5000)


def test_iteration_cap_reports_residuals():
    rng = np.random.default_rng(0)
    H = np.diag([1e-3, 1e3])
    with pytest.raises(QpNotConverged) as info:
        solve_qp(H, rng.normal(size=2), np.eye(2), [-0.5, 0.3], max_iter=3, check_every=1)
    assert info.value.iterations == 3
