import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PENDULUM_A, PENDULUM_B, random_system, rollout_cost
from vempc.errors import ConfigurationError
from vempc.mpc_core import (ConstraintSpec, MpcProblem, PlantModel, build_constraints,
                            build_prediction, condense_cost)


def test_condensed_cost_matches_rollout_random_systems():
    rng = np.random.default_rng(0)
    for _ in range(100):
        model, prob = random_system(rng)
        qp = condense_cost(model, prob)
        x0 = rng.normal(size=model.n)
        U = rng.normal(size=prob.N * model.m)
        ref = rollout_cost(model, prob, U, x0)
        assert abs(qp.cost(U, x0) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_scalar_example_condensation():
    # n = m = 1, N = 1: J = x0^2 + (a x0 + b u)^2 + r u^2
    model = PlantModel([[2.0]], [[1.0]])
    prob = MpcProblem(1, [[1.0]], [[1.0]], [[1.0]])
    qp = condense_cost(model, prob)
    np.testing.assert_allclose(qp.H, [[4.0]])
    np.testing.assert_allclose(qp.S, [[4.0]])
    np.testing.assert_allclose(qp.P, [[5.0]])


def test_prediction_matrices_pendulum():
    model = PlantModel(PENDULUM_A, PENDULUM_B)
    Lam, Psi = build_prediction(model, 3)
    np.testing.assert_allclose(Lam[:2], PENDULUM_A)
    np.testing.assert_allclose(Lam[4:], np.linalg.matrix_power(PENDULUM_A, 3))
    np.testing.assert_allclose(Psi[2:4, 0:1], PENDULUM_A @ PENDULUM_B)
    assert np.all(Psi[:2, 1:] == 0)


def test_pendulum_constraint_count():
    model = PlantModel(PENDULUM_A, PENDULUM_B)
    prob = MpcProblem(10, np.diag([50.0, 5.0]), np.diag([100.0, 10.0]), [[0.1]],
                      ConstraintSpec([0.5, 0.8], [1.0]))
    qp = condense_cost(model, prob)
    lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
    assert lc.p == 60
    # the zero plan from the origin is strictly feasible
    assert np.all(lc.residual(np.zeros(10), np.zeros(2)) < 0)


def test_constraint_residual_matches_rollout():
    rng = np.random.default_rng(3)
    model, prob = random_system(rng, n=3, m=2, N=4)
    qp = condense_cost(model, prob)
    lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
    x0, U = rng.normal(size=3), rng.normal(size=8)
    X = model.rollout(x0, U)
    g = lc.residual(U, x0)
    xs = np.asarray(prob.constraints.state_bounds)
    us = np.asarray(prob.constraints.input_bounds)
    expect_max = max(np.max(np.abs(X) - xs), np.max(np.abs(U.reshape(-1, 2)) - us))
    assert np.isclose(g.max(), expect_max)


@pytest.mark.parametrize("kwargs, match", [
    (dict(N=0), "horizon"),
    (dict(R=[[0.0]]), "positive definite"),
    (dict(Q=[[1.0, 2.0], [0.0, 1.0]]), "symmetric"),
])
def test_problem_validation(kwargs, match):
    base = dict(N=2, Q=np.eye(2), Qf=np.eye(2), R=[[1.0]])
    base.update(kwargs)
    with pytest.raises(ConfigurationError, match=match):
        MpcProblem(**base)


def test_plant_shape_errors():
    with pytest.raises(ConfigurationError):
        PlantModel(np.eye(2), np.ones((3, 1)))
    with pytest.raises(ConfigurationError):
        PlantModel(np.ones((2, 3)), np.ones((2, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_hessian_positive_definite(seed):
    model, prob = random_system(np.random.default_rng(seed))
    qp = condense_cost(model, prob)
    assert np.linalg.eigvalsh(qp.H).min() > 0
    np.testing.assert_allclose(qp.H, qp.H.T, atol=1e-12)
