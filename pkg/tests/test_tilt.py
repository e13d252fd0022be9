import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_system
from vempc.errors import ConfigurationError
from vempc.mpc_core import (ConstraintSpec, MpcProblem, PlantModel, build_constraints,
                            build_prediction, column_products, condense_cost, sample_tilted,
                            samples_from_noise, standard_normal, tilt)


def scalar_setup(bound=10.0, Q=0.0):
    model = PlantModel([[1.0]], [[1.0]])
    cons = ConstraintSpec(None, [bound])
    prob = MpcProblem(1, [[Q]], [[1.0]], [[1.0]], cons)
    qp = condense_cost(model, prob)
    lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
    return model, qp, lc


def test_prediction_small_examples():
    model = PlantModel([[1.0]], [[1.0]])
    Lam, Psi = build_prediction(model, 1)
    np.testing.assert_array_equal(Lam, [[1.0]])
    np.testing.assert_array_equal(Psi, [[1.0]])
    Lam, Psi = build_prediction(model, 2)
    np.testing.assert_array_equal(Lam, [[1.0], [1.0]])
    np.testing.assert_array_equal(Psi, [[1.0, 0.0], [1.0, 1.0]])


def test_scalar_condensed_terms():
    _, qp, _ = scalar_setup()
    np.testing.assert_allclose(qp.H, [[4.0]])
    np.testing.assert_allclose(qp.S, [[2.0]])
    np.testing.assert_allclose(qp.P, [[1.0]])


def test_input_only_box_rows():
    model, qp, lc = scalar_setup(bound=1.0)
    np.testing.assert_array_equal(lc.G, [[1.0], [-1.0]])
    np.testing.assert_array_equal(lc.h(np.array([0.7])), [1.0, 1.0])


def test_unbounded_spec_rejected():
    model = PlantModel([[1.0]], [[1.0]])
    prob = MpcProblem(1, [[0.0]], [[1.0]], [[1.0]])
    qp = condense_cost(model, prob)
    with pytest.raises(ConfigurationError, match="no bounds"):
        build_constraints(prob.constraints, model, qp.Lam, qp.Psi)


def test_scalar_tilt_closed_form():
    _, qp, lc = scalar_setup(bound=1.0)
    tg = tilt(qp, lc, 0.0625, 0.1)
    assert tg.Sigma_U[0, 0] == pytest.approx(1 / 56, rel=1e-12)
    # S = 2 here, so m_U = -(1/lam) Sigma_U S x0 = -(20/56) x0
    assert tg.mean(np.array([1.0]))[0] == pytest.approx(-20 / 56, rel=1e-12)


def test_small_temperature_limit_is_unconstrained_optimum():
    rng = np.random.default_rng(2)
    model, prob = random_system(rng, n=2, m=1, N=3)
    qp = condense_cost(model, prob)
    lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
    tg = tilt(qp, lc, np.eye(3), 1e-6)
    x0 = np.array([0.4, -0.2])
    opt = -np.linalg.solve(qp.H, qp.S.T @ x0)
    np.testing.assert_allclose(tg.mean(x0), opt, rtol=1e-4)


def test_pendulum_sigma_u_spectrum(pendulum_design):
    eig = np.linalg.eigvalsh(pendulum_design.tg.Sigma_U)
    assert eig.min() > 0 and eig.max() <= 0.0625


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_tilted_log_density_differs_by_constant(seed):
    rng = np.random.default_rng(seed)
    model, prob = random_system(rng, n=2, m=1, N=2)
    qp = condense_cost(model, prob)
    lc = build_constraints(prob.constraints, model, qp.Lam, qp.Psi)
    Sigma0 = np.diag(rng.uniform(0.1, 1.0, 2))
    lam = float(rng.uniform(0.05, 2.0))
    tg = tilt(qp, lc, Sigma0, lam)
    x0 = rng.normal(size=2)
    Sinv = np.linalg.inv(Sigma0)

    def lhs(U):
        jq = 0.5 * U @ qp.H @ U + x0 @ qp.S @ U
        return -0.5 * U @ Sinv @ U - jq / lam

    U1, U2 = rng.normal(size=2), rng.normal(size=2)
    d1 = lhs(U1) - tg.log_density(U1, x0)
    d2 = lhs(U2) - tg.log_density(U2, x0)
    assert abs(d1 - d2) <= 1e-8


def test_zero_noise_sample_is_mean(pendulum_design):
    tg = pendulum_design.tg
    x0 = np.array([0.3, 0.1])
    b = samples_from_noise(tg, x0, np.zeros((1, tg.dim)))
    np.testing.assert_array_equal(b.U[0], tg.mean(x0))
    np.testing.assert_array_equal(b.residuals[0], tg.offset(x0))


def test_sampling_affine_identity(pendulum_design):
    tg = pendulum_design.tg
    lc = tg.constraints
    x0 = np.array([0.3, 0.1])
    b = sample_tilted(tg, x0, 50, seed=9)
    direct = b.U @ lc.G.T - lc.h(x0)
    np.testing.assert_allclose(b.residuals, direct, atol=1e-12)
    np.testing.assert_allclose(b.U - b.mean, b.xi @ tg.L_U.T, atol=1e-14)


def test_sampling_is_deterministic(pendulum_design):
    tg = pendulum_design.tg
    a = sample_tilted(tg, [0.1, 0.0], 20, seed=4)
    b = sample_tilted(tg, [0.1, 0.0], 20, seed=4)
    assert np.array_equal(a.U, b.U) and np.array_equal(a.residuals, b.residuals)


def test_column_products_matches_matmul():
    rng = np.random.default_rng(0)
    M, xi = rng.normal(size=(7, 5)), rng.normal(size=(11, 5))
    np.testing.assert_allclose(column_products(M, xi), xi @ M.T, atol=1e-13)


def test_tilt_rejects_bad_inputs(pendulum_design):
    d = pendulum_design
    with pytest.raises(ConfigurationError):
        tilt(d.qp, d.constraints, np.eye(10), 0.0)
    with pytest.raises(ConfigurationError):
        tilt(d.qp, d.constraints, np.eye(3), 0.1)
