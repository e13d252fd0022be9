import numpy as np
import pytest

from vempc.ckks import make_params
from vempc.harness_cli import load_bundled, prepare
from vempc.he_backend import CkksBackend
from vempc.mpc_core import ConstraintSpec, MpcProblem, PlantModel

PENDULUM_A = np.array([[1.0246, 0.0504], [0.9890, 1.0246]])
PENDULUM_B = np.array([[0.0251], [1.0082]])


def random_system(rng, n=None, m=None, N=None, constrained=True):
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 3))
    N = N or int(rng.integers(1, 9))
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    B = rng.normal(size=(n, m))
    L = rng.normal(size=(n, n))
    Q = L @ L.T + 0.1 * np.eye(n)
    Lf = rng.normal(size=(n, n))
    Qf = Lf @ Lf.T
    R = np.diag(rng.uniform(0.1, 2.0, m))
    cons = ConstraintSpec(list(rng.uniform(0.5, 2.0, n)), list(rng.uniform(0.5, 2.0, m))) \
        if constrained else ConstraintSpec()
    return PlantModel(A, B), MpcProblem(N, Q, Qf, R, cons)


def rollout_cost(model, prob, U, x0):
    X = model.rollout(x0, U)
    Us = np.asarray(U).reshape(-1, model.m)
    J = x0 @ prob.Q @ x0
    for k in range(prob.N - 1):
        J += X[k] @ prob.Q @ X[k]
    J += X[-1] @ prob.Qf @ X[-1]
    J += sum(u @ prob.R @ u for u in Us)
    return J


@pytest.fixture(scope="session")
def pendulum_cfg():
    return load_bundled()


@pytest.fixture(scope="session")
def pendulum_design(pendulum_cfg):
    return prepare(pendulum_cfg)


@pytest.fixture(scope="session")
def ckks13():
    """Pendulum-sized CKKS backend: logN 13, depth 4, reduction rotations."""
    return CkksBackend(make_params(13, 4), seed=11, rotations=[1, 2, 4, 8, 16, 32])


@pytest.fixture(scope="session")
def ckks_small():
    """Small ring for fast property checks."""
    return CkksBackend(make_params(10, 3), seed=5, rotations=[1, 2, 4, 8])


ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Store one acceptance verdict line per criterion, printed in the summary."""
    def _record(key: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE[key] = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
