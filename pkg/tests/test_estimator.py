import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vempc.errors import NoInformativeSamples
from vempc.mpc_core import (ConstraintSpec, MpcProblem, PlantModel, build_constraints,
                            condense_cost, effective_sample_size, estimate, estimate_or_fallback,
                            indicator_weight, ratio_standard_error, sample_tilted, tilt)


def test_uniform_weights_give_sample_mean():
    U = np.random.default_rng(0).normal(size=(30, 4))
    np.testing.assert_allclose(estimate(U, np.ones(30)), U.mean(axis=0))


def test_single_survivor():
    U = np.random.default_rng(1).normal(size=(5, 3))
    w = np.zeros(5)
    w[0] = 1.0
    np.testing.assert_array_equal(estimate(U, w), U[0])


def test_all_zero_weights():
    U = np.ones((3, 2))
    with pytest.raises(NoInformativeSamples):
        estimate(U, np.zeros(3))
    out, fell = estimate_or_fallback(U, np.zeros(3), np.array([7.0, 8.0]))
    assert fell and np.array_equal(out, [7.0, 8.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_weight_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    U, w = rng.normal(size=(20, 3)), rng.uniform(0.01, 1.0, 20)
    np.testing.assert_allclose(estimate(U, c * w), estimate(U, w), atol=1e-12)


def test_effective_sample_size():
    assert effective_sample_size(np.ones(10)) == pytest.approx(10.0)
    assert effective_sample_size([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert effective_sample_size(np.zeros(4)) == 0.0


def test_interior_estimate_near_tilted_mean(pendulum_design):
    tg = pendulum_design.tg
    x0 = np.zeros(2)
    b = sample_tilted(tg, x0, 100_000, seed=3)
    w = np.ones(b.K)
    se = ratio_standard_error(b.U, w)
    assert np.all(np.abs(estimate(b.U, w) - tg.mean(x0)) <= 3 * se)


def _scalar(bound):
    model = PlantModel([[1.0]], [[1.0]])
    prob = MpcProblem(1, [[0.0]], [[1.0]], [[1.0]], ConstraintSpec(None, [bound]))
    qp = condense_cost(model, prob)
    return qp, build_constraints(prob.constraints, model, qp.Lam, qp.Psi)


def test_change_of_measure_small_scale():
    qp, lc = _scalar(0.3)
    Sigma0, lam, x0 = 0.0625, 0.1, np.array([1.0])
    tg = tilt(qp, lc, Sigma0, lam)
    b = sample_tilted(tg, x0, 50_000, seed=8)
    w_t = indicator_weight(b.residuals)
    U0 = np.sqrt(Sigma0) * b.xi
    jq = 0.5 * qp.H[0, 0] * U0[:, 0] ** 2 + (x0 @ qp.S) * U0[:, 0]
    w_d = np.exp(-(jq - jq.min()) / lam) * indicator_weight(U0 @ lc.G.T - lc.h(x0))
    est_t, est_d = estimate(b.U, w_t), estimate(U0, w_d)
    se = np.hypot(ratio_standard_error(b.U, w_t), ratio_standard_error(U0, w_d))
    assert np.all(np.abs(est_t - est_d) <= 3 * se)
