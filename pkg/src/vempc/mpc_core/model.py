"""Linear plant, MPC problem data and the condensed QP form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from ..errors import ConfigurationError, NumericalError

_PSD_TOL = 1e-10


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PlantModel:
    """Discrete LTI dynamics ``x(t+1) = A x(t) + B u(t)``.

    ``dt`` is the sampling period in seconds and is carried as metadata only.
    """

    A: np.ndarray
    B: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ConfigurationError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ConfigurationError(
                f"B has {B.shape[0]} rows but A has dimension {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.atleast_1d(u)

    def rollout(self, x0, U) -> np.ndarray:
        """Predicted states ``x_1..x_N`` as an ``(N, n)`` array."""
        U = np.asarray(U, dtype=float).reshape(-1, self.m)
        x = np.asarray(x0, dtype=float)
        states = []
        for u in U:
            x = self.step(x, u)
            states.append(x)
        return np.array(states)


@dataclass(frozen=True)
class ConstraintSpec:
    """Symmetric box bounds on predicted states and inputs, or a raw affine triple.

    ``state_bounds[i]`` bounds ``|(x_k)_i|`` for ``k = 1..N``; ``input_bounds[i]``
    bounds ``|(u_k)_i|`` for ``k = 0..N-1``.  ``None`` leaves a coordinate free.
    When ``raw`` is given as ``(G, h_const, E)`` it is used verbatim.
    """

    state_bounds: Optional[Sequence[Optional[float]]] = None
    input_bounds: Optional[Sequence[Optional[float]]] = None
    raw: Optional[tuple] = None

    def bounded_count(self) -> tuple[int, int]:
        ns = sum(b is not None for b in (self.state_bounds or ()))
        nu = sum(b is not None for b in (self.input_bounds or ()))
        return ns, nu


@dataclass(frozen=True)
class MpcProblem:
    N: int
    Q: np.ndarray
    Qf: np.ndarray
    R: np.ndarray
    constraints: ConstraintSpec = field(default_factory=ConstraintSpec)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"horizon N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("Q", "Qf", "R"):
            mat = _as_matrix(getattr(self, name), name)
            if mat.shape[0] != mat.shape[1]:
                raise ConfigurationError(f"{name} must be square, got {mat.shape}")
            if not np.allclose(mat, mat.T, atol=1e-12, rtol=0):
                raise ConfigurationError(f"{name} must be symmetric")
            eig = np.linalg.eigvalsh(mat)
            if name == "R":
                if eig.min() <= 0:
                    raise ConfigurationError("R must be positive definite")
            elif eig.min() < -_PSD_TOL:
                raise ConfigurationError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, mat)

    def check_against(self, model: PlantModel) -> None:
        if self.Q.shape != (model.n, model.n) or self.Qf.shape != (model.n, model.n):
            raise ConfigurationError("Q/Qf dimensions do not match the state dimension")
        if self.R.shape != (model.m, model.m):
            raise ConfigurationError("R dimension does not match the input dimension")


@dataclass(frozen=True)
class CondensedQp:
    """``J_0(U; x0) = 1/2 U'HU + x0'SU + x0'Px0`` with the prediction matrices."""

    Lam: np.ndarray
    Psi: np.ndarray
    H: np.ndarray
    S: np.ndarray
    P: np.ndarray

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def cost(self, U, x0) -> float:
        U = np.asarray(U, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        return float(0.5 * U @ self.H @ U + x0 @ self.S @ U + x0 @ self.P @ x0)

    def reduced_cost(self, U, x0) -> float:
        """The objective with the constant ``x0'Px0`` dropped."""
        U = np.asarray(U, dtype=float)
        return float(0.5 * U @ self.H @ U + np.asarray(x0, dtype=float) @ self.S @ U)


@dataclass(frozen=True)
class LinearConstraints:
    """``G U <= h(x0)`` with ``h(x0) = h_const + E x0``."""

    G: np.ndarray
    h_const: np.ndarray
    E: np.ndarray

    @property
    def p(self) -> int:
        return self.G.shape[0]

    def h(self, x0) -> np.ndarray:
        return self.h_const + self.E @ np.asarray(x0, dtype=float)

    def residual(self, U, x0) -> np.ndarray:
        """``g(U; x0) = G U - h(x0)``; works row-wise on a stack of ``U``."""
        U = np.asarray(U, dtype=float)
        return U @ self.G.T - self.h(x0)


def build_prediction(model: PlantModel, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked prediction ``X = Lam x0 + Psi U`` over ``x_1..x_N``."""
    if N < 1:
        raise ConfigurationError("horizon must be >= 1")
    n, m = model.n, model.m
    powers = [np.eye(n)]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(N):
            powers.append(model.A @ powers[-1])
    Lam = np.vstack(powers[1:])
    Psi = np.zeros((N * n, N * m))
    for k in range(1, N + 1):
        for j in range(k):
            Psi[(k - 1) * n:k * n, j * m:(j + 1) * m] = powers[k - 1 - j] @ model.B
    return Lam, Psi


def condense_cost(model: PlantModel, problem: MpcProblem) -> CondensedQp:
    problem.check_against(model)
    N = problem.N
    Lam, Psi = build_prediction(model, N)
    Qbar = scipy.linalg.block_diag(*([problem.Q] * (N - 1) + [problem.Qf]))
    Rbar = scipy.linalg.block_diag(*([problem.R] * N))
    with np.errstate(over="ignore", invalid="ignore"):
        H = 2.0 * (Psi.T @ Qbar @ Psi + Rbar)
        H = 0.5 * (H + H.T)
        S = 2.0 * Lam.T @ Qbar @ Psi
        P = problem.Q + Lam.T @ Qbar @ Lam
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(S)) and np.all(np.isfinite(P))):
        raise NumericalError("condensed cost overflowed; the horizon prediction is not finite")
    return CondensedQp(Lam=Lam, Psi=Psi, H=H, S=S, P=P)


def build_constraints(spec: ConstraintSpec, model: PlantModel,
                      Lam: np.ndarray, Psi: np.ndarray) -> LinearConstraints:
    """Compile box bounds into ``(G, h_const, E)``.

    Rows are ordered state bounds first (step-major, then coordinate), then
    input bounds; each bounded scalar contributes a ``+``/``-`` row pair.
    """
    if spec.raw is not None:
        G, h_const, E = (np.asarray(a, dtype=float) for a in spec.raw)
        G = np.atleast_2d(G)
        E = E.reshape(G.shape[0], model.n)
        return LinearConstraints(G=G, h_const=h_const.reshape(-1), E=E)

    n, m = model.n, model.m
    N = Psi.shape[1] // m
    state_bounds = list(spec.state_bounds or [None] * n)
    input_bounds = list(spec.input_bounds or [None] * m)
    if len(state_bounds) != n or len(input_bounds) != m:
        raise ConfigurationError("bound lists must match state/input dimensions")
    if all(b is None for b in state_bounds + input_bounds):
        raise ConfigurationError("constraint spec has no bounds and no raw triple")

    G_rows, h_rows, E_rows = [], [], []
    for k in range(N):
        for i, beta in enumerate(state_bounds):
            if beta is None:
                continue
            beta = float(beta)
            if not np.isfinite(beta) or beta < 0:
                raise ConfigurationError(f"state bound {i} must be finite and >= 0")
            row = k * n + i
            for sign in (1.0, -1.0):
                G_rows.append(sign * Psi[row])
                h_rows.append(beta)
                E_rows.append(-sign * Lam[row])
    for k in range(N):
        for i, gamma in enumerate(input_bounds):
            if gamma is None:
                continue
            gamma = float(gamma)
            if not np.isfinite(gamma) or gamma < 0:
                raise ConfigurationError(f"input bound {i} must be finite and >= 0")
            sel = np.zeros(N * m)
            sel[k * m + i] = 1.0
            for sign in (1.0, -1.0):
                G_rows.append(sign * sel)
                h_rows.append(gamma)
                E_rows.append(np.zeros(n))
    return LinearConstraints(G=np.array(G_rows), h_const=np.array(h_rows),
                             E=np.array(E_rows))
