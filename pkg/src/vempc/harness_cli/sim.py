"""Closed-loop simulation, mode comparison and the timing ablation."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..ckks.budget import ErrorBudget, compute_budget
from ..errors import ConfigurationError
from ..he_backend import CkksBackend, HeBackend, MockBackend, NoiseModel
from ..mpc_core.estimator import effective_sample_size, estimate_or_fallback
from ..mpc_core.model import CondensedQp, LinearConstraints, build_constraints, condense_cost
from ..mpc_core.qp import reference_qp_solve
from ..mpc_core.rng import derive_seed, standard_normal
from ..mpc_core.surrogate import (Surrogate, WeightRule, chebyshev_fit, indicator_weight,
                                  surrogate_score, threshold_weight, violation_score)
from ..mpc_core.tilt import TiltedGaussian, samples_from_noise, tilt
from ..protocol import (Channel, CloudService, InProcessChannel, PackingLayout, ProtocolSession,
                        VempcClient)
from .config import MODES, SimConfig

log = logging.getLogger(__name__)

# violations are margins below minus this tolerance
QP_TOL = 1e-6
SAMPLED_TOL = 1e-9
VEMPC_MODES = ("vempc-mock", "vempc-ckks")


@dataclass(frozen=True)
class Design:
    """Offline plaintext quantities shared by every mode."""

    qp: CondensedQp
    constraints: LinearConstraints
    tg: TiltedGaussian
    surrogate: Surrogate

    @property
    def p(self) -> int:
        return self.constraints.p

    @property
    def base_tau(self) -> float:
        return self.p * self.surrogate.delta


def auto_bound(tg: TiltedGaussian, box, z: float) -> float:
    """``max_j |b_j(x)| + z ||Gamma_j||`` over the vertices of the operating box."""
    box = np.asarray(box, dtype=float)
    gamma_norm = np.linalg.norm(tg.Gamma, axis=1)
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=box.size):
        b = tg.offset(np.asarray(signs) * box)
        best = max(best, float(np.max(np.abs(b) + z * gamma_norm)))
    return best


def prepare(cfg: SimConfig) -> Design:
    qp = condense_cost(cfg.model, cfg.problem)
    lc = build_constraints(cfg.problem.constraints, cfg.model, qp.Lam, qp.Psi)
    tg = tilt(qp, lc, cfg.Sigma0, cfg.lam)
    bound = cfg.bound if cfg.bound is not None else auto_bound(tg, cfg.operating_box, cfg.z)
    return Design(qp, lc, tg, chebyshev_fit(cfg.degree, bound, method=cfg.fit_method))


def noise_for_epoch(cfg: SimConfig, dim: int, epoch: int = 0) -> np.ndarray:
    """The cloud's perturbation draws for a cache epoch."""
    seed = cfg.seed if epoch == 0 else derive_seed(cfg.seed, epoch)
    return standard_normal(seed, cfg.K, dim)


def _epoch(cfg: SimConfig, step: int) -> int:
    return step // cfg.refresh_every if cfg.refresh_every and step else 0


def build_backend(cfg: SimConfig, mode: str) -> HeBackend:
    """Key-holding backend for an encrypted mode, sized from the config."""
    tg_dim = cfg.problem.N * cfg.model.m
    slots = 1 << (cfg.log_n - 1)
    if mode == "vempc-mock":
        return MockBackend(slots, cfg.he_depth, NoiseModel(*cfg.mock_noise), cfg.key_seed)
    if mode == "vempc-ckks":
        rotations = PackingLayout(slots, tg_dim, constraint_count(cfg)).reduction_rotations()
        return CkksBackend(cfg.ckks_params(), seed=cfg.key_seed, rotations=rotations)
    raise ConfigurationError(f"mode {mode!r} has no encryption backend")


def constraint_count(cfg: SimConfig) -> int:
    """``p`` for box bounds: two rows per bounded coordinate and stage."""
    ns, nu = cfg.problem.constraints.bounded_count()
    return 2 * cfg.problem.N * (ns + nu)


@dataclass
class StepInfo:
    u: np.ndarray
    client_ms: float = 0.0
    cloud_ms: float = 0.0
    total_ms: float = 0.0
    ess: float = float("nan")
    max_score: float = float("nan")
    fell_back: bool = False
    err_U: float = float("nan")
    err_s: float = float("nan")


class QpController:
    def __init__(self, cfg: SimConfig, design: Design):
        self.design = design
        self.m = cfg.model.m

    def act(self, x, t: int) -> StepInfo:
        t0 = time.perf_counter()
        res = reference_qp_solve(self.design.qp, self.design.constraints, x)
        ms = (time.perf_counter() - t0) * 1e3
        return StepInfo(res.U[:self.m].copy(), client_ms=ms, total_ms=ms)

    def close(self) -> None:
        pass


class VariationalController:
    """Plaintext variational estimator with surrogate or exact-indicator weights."""

    def __init__(self, cfg: SimConfig, design: Design, exact: bool = False):
        self.cfg = cfg
        self.design = design
        self.exact = exact
        self.rule = WeightRule(design.base_tau if cfg.tau is None else cfg.tau, cfg.eta)
        self._xi = {}

    def _noise(self, t: int) -> np.ndarray:
        e = _epoch(self.cfg, t)
        if e not in self._xi:
            self._xi = {e: noise_for_epoch(self.cfg, self.design.tg.dim, e)}
        return self._xi[e]

    def act(self, x, t: int) -> StepInfo:
        t0 = time.perf_counter()
        batch = samples_from_noise(self.design.tg, x, self._noise(t))
        if self.exact:
            scores = violation_score(batch.residuals)
            weights = indicator_weight(batch.residuals)
        else:
            scores = surrogate_score(self.design.surrogate, batch.residuals)
            weights = threshold_weight(self.rule, scores)[1]
        U, fell_back = estimate_or_fallback(batch.U, weights, batch.mean)
        ms = (time.perf_counter() - t0) * 1e3
        if fell_back:
            log.warning("step %d: all weights zero, applying the tilted mean", t)
        return StepInfo(U[:self.cfg.model.m].copy(), client_ms=ms, total_ms=ms,
                        ess=effective_sample_size(weights), max_score=float(np.max(scores)),
                        fell_back=fell_back)

    def close(self) -> None:
        pass


def error_budget(cfg: SimConfig, design: Design, backend: HeBackend) -> ErrorBudget:
    """Worst-case budgets from the backend's primitive bounds."""
    xi = noise_for_epoch(cfg, design.tg.dim)
    return compute_budget(backend.primitive_bounds(), (cfg.problem.N, cfg.model.m, design.p),
                          design.surrogate, float(np.max(np.abs(design.tg.L_U))),
                          float(np.max(np.abs(xi))))


def make_client(cfg: SimConfig, design: Design, backend: HeBackend) -> tuple:
    """Protocol client with ``tau = p delta + B_s`` unless the config fixes tau."""
    budget = error_budget(cfg, design, backend)
    tau = design.base_tau + budget.B_s if cfg.tau is None else cfg.tau
    client = VempcClient(backend, design.tg, design.surrogate, WeightRule(tau, cfg.eta), cfg.K,
                         cfg.seed, m=cfg.model.m, batches=cfg.n_batches,
                         refresh_every=cfg.refresh_every)
    return client, budget


class VempcController:
    """Client side of the encrypted protocol plus a harness-side audit.

    The audit recomputes the plaintext samples and surrogate scores from the
    same draws and records the worst slot errors of the decrypted values.
    """

    def __init__(self, cfg: SimConfig, design: Design, backend: HeBackend,
                 channel: Optional[Channel] = None, offline_msg=None):
        self.cfg = cfg
        self.design = design
        client, self.budget = make_client(cfg, design, backend)
        self.rule = client.rule
        channel = channel or InProcessChannel(CloudService(cfg.workers))
        self.session = ProtocolSession(client, channel).start(offline_msg)
        self._twin = VariationalController(cfg, design)

    def act(self, x, t: int) -> StepInfo:
        res = self.session.step(x)
        batch = samples_from_noise(self.design.tg, x, self._twin._noise(t))
        plain_s = surrogate_score(self.design.surrogate, batch.residuals)
        if res.fell_back:
            log.warning("step %d: all weights zero, applying the tilted mean", t)
        return StepInfo(res.u0, client_ms=res.client_ms, cloud_ms=res.cloud_ms,
                        total_ms=res.total_ms, ess=res.ess, max_score=float(np.max(res.scores)),
                        fell_back=res.fell_back,
                        err_U=float(np.max(np.abs(res.samples - batch.U))),
                        err_s=float(np.max(np.abs(res.scores - plain_s))))

    def close(self) -> None:
        self.session.close()


def make_controller(cfg: SimConfig, mode: str, design: Design,
                    backend: Optional[HeBackend] = None, channel: Optional[Channel] = None,
                    offline_msg=None):
    if mode == "qp":
        return QpController(cfg, design)
    if mode == "variational":
        return VariationalController(cfg, design)
    if mode == "variational-exact":
        return VariationalController(cfg, design, exact=True)
    if mode in VEMPC_MODES:
        return VempcController(cfg, design, backend or build_backend(cfg, mode), channel, offline_msg)
    raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")


@dataclass
class Table:
    """Column-ordered table of equal-length arrays."""

    columns: tuple
    data: dict

    def __len__(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def rows(self):
        for i in range(len(self)):
            yield [self.data[c][i] for c in self.columns]


INT_COLUMNS = frozenset({"t", "fell_back", "degree", "log_n", "K", "workers", "batches",
                         "capacity", "steps"})


@dataclass
class TrajectoryLog(Table):
    """One row per step; ``meta`` holds run-level facts such as the final state."""

    meta: dict = field(default_factory=dict)

    @property
    def state_names(self) -> tuple:
        return tuple(self.meta.get("state_names", ()))

    @property
    def input_names(self) -> tuple:
        return tuple(self.meta.get("input_names", ()))

    def states(self) -> np.ndarray:
        return np.column_stack([self.data[c] for c in self.state_names])

    def inputs(self) -> np.ndarray:
        return np.column_stack([self.data[c] for c in self.input_names])

    def violations(self, tol: Optional[float] = None) -> int:
        """Steps whose state or applied input leaves the box by more than ``tol``."""
        tol = self.meta.get("tolerance", SAMPLED_TOL) if tol is None else tol
        count = int(np.sum(self.data["margin"] < -tol))
        final = self.meta.get("final_margin")
        return count + int(final is not None and final < -tol)


def trajectory_columns(cfg: SimConfig) -> tuple:
    return (("t", "time_s") + tuple(cfg.state_names) + tuple(cfg.input_names)
            + ("client_ms", "cloud_ms", "total_ms", "ess", "max_score", "fell_back",
               "margin", "err_U", "err_s"))


def _box_margin(value, bounds) -> float:
    if not bounds:
        return float("inf")
    margins = [b - abs(v) for v, b in zip(value, bounds) if b is not None]
    return min(margins) if margins else float("inf")


def constraint_margin(cfg: SimConfig, x, u=None) -> float:
    """Smallest distance to a box face; negative when a bound is violated."""
    spec = cfg.problem.constraints
    margin = _box_margin(x, spec.state_bounds)
    if u is not None:
        margin = min(margin, _box_margin(u, spec.input_bounds))
    return margin


def closed_loop_run(cfg: SimConfig, mode: Optional[str] = None,
                    backend: Optional[HeBackend] = None,
                    channel: Optional[Channel] = None, offline_msg=None) -> TrajectoryLog:
    """Receding-horizon simulation: apply the first input, advance the plant, repeat.

    For encrypted modes the offline phase runs before step 0, replaying
    ``offline_msg`` when given.  Estimator fallbacks are logged and recorded,
    never fatal.
    """
    mode = mode or cfg.mode
    design = prepare(cfg)
    ctrl = make_controller(cfg, mode, design, backend, channel, offline_msg)
    cols = trajectory_columns(cfg)
    rows = []
    x = np.array(cfg.x0, dtype=float)
    try:
        for t in range(cfg.T):
            info = ctrl.act(x, t)
            u = np.atleast_1d(info.u)
            rows.append([t, t * cfg.model.dt, *x, *u, info.client_ms, info.cloud_ms,
                         info.total_ms, info.ess, info.max_score, int(info.fell_back),
                         constraint_margin(cfg, x, u), info.err_U, info.err_s])
            x = cfg.model.step(x, u)
    finally:
        ctrl.close()
    arr = list(zip(*rows))
    data = {c: np.asarray(v, dtype=int if c in INT_COLUMNS else float) for c, v in zip(cols, arr)}
    meta = {"mode": mode, "state_names": cfg.state_names, "input_names": cfg.input_names,
            "final_state": x, "final_margin": constraint_margin(cfg, x),
            "tolerance": QP_TOL if mode == "qp" else SAMPLED_TOL,
            "bound": design.surrogate.bound, "delta": design.surrogate.delta,
            "p": design.p}
    if isinstance(ctrl, VempcController):
        meta.update(budget=ctrl.budget, tau=ctrl.rule.tau, messages_sent=dict(ctrl.session.channel.sent),
                    messages_received=dict(ctrl.session.channel.received))
    elif isinstance(ctrl, VariationalController):
        meta.update(tau=ctrl.rule.tau)
    return TrajectoryLog(cols, data, meta)


@dataclass
class CompareReport:
    table: Table
    summary: dict
    logs: dict


def compare_modes(cfg: SimConfig, modes: Sequence[str], reference: Optional[str] = None,
                  backends: Optional[dict] = None) -> CompareReport:
    """Run ``modes`` with common seeds and tabulate per-step deviations.

    Deviations are taken against ``reference`` (default: ``variational`` when
    listed, else the first mode) and, in the summary, also against ``qp``.
    """
    modes = list(dict.fromkeys(modes))
    if not modes:
        raise ConfigurationError("compare needs at least one mode")
    for md in modes:
        if md not in MODES:
            raise ConfigurationError(f"unknown mode {md!r}; expected one of {MODES}")
    reference = reference or ("variational" if "variational" in modes else modes[0])
    if reference not in modes:
        raise ConfigurationError(f"reference mode {reference!r} is not among {modes}")
    backends = backends or {}
    logs = {md: closed_loop_run(cfg, md, backend=backends.get(md)) for md in modes}
    ref = logs[reference]
    cols, data = ["t"], {"t": ref["t"]}
    summary = {}
    for md in modes:
        lg = logs[md]
        for c in cfg.state_names + cfg.input_names:
            cols.append(f"{md}:{c}")
            data[cols[-1]] = lg[c]
        du = np.max(np.abs(lg.inputs() - ref.inputs()), axis=1)
        dx = np.max(np.abs(lg.states() - ref.states()), axis=1)
        cols += [f"{md}:du", f"{md}:dx"]
        data[f"{md}:du"], data[f"{md}:dx"] = du, dx
        entry = {"violations": lg.violations(), "max_du": float(du.max()),
                 "max_dx": float(dx.max()),
                 "final_norm": float(np.max(np.abs(lg.meta["final_state"]))),
                 "mean_total_ms": float(np.mean(lg["total_ms"]))}
        if "qp" in logs:
            q = logs["qp"]
            entry["max_du_qp"] = float(np.max(np.abs(lg.inputs() - q.inputs())))
            entry["max_dtheta_qp"] = float(np.max(np.abs(lg.states()[:, 0] - q.states()[:, 0])))
        summary[md] = entry
    summary["reference"] = reference
    return CompareReport(Table(tuple(cols), data), summary, logs)


BENCH_COLUMNS = ("degree", "log_n", "K", "workers", "batches", "capacity", "steps",
                 "mean_ms", "std_ms", "cloud_mean_ms", "client_mean_ms")


def timing_stats(values) -> tuple:
    """Mean and sample std over steps ``1..T-1`` (step 0 is warm-up)."""
    v = np.asarray(values, dtype=float)[1:]
    if v.size == 0:
        raise ConfigurationError("timing needs at least two steps")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def bench_ablation(cfg: SimConfig, degrees=(3, 4, 5), log_ns=(13, 14), Ks=(120, 240),
                   steps: Optional[int] = None) -> Table:
    """Online step time per ``(degree, log_n, K)`` cell with the CKKS backend.

    Cells run sequentially.  Keys are generated once per ``(degree, log_n)``
    pair and shared by its ``K`` cells.  Depth is ``degree + 1``.
    """
    steps = cfg.T if steps is None else steps
    rows = []
    for log_n in log_ns:
        for degree in degrees:
            base = cfg.with_overrides(degree=int(degree), log_n=int(log_n), T=int(steps))
            base = replace(base, depth=None)
            backend = build_backend(base, "vempc-ckks")
            for K in Ks:
                c = base.with_overrides(K=int(K))
                lg = closed_loop_run(c, "vempc-ckks", backend=backend)
                mean, std = timing_stats(lg["total_ms"])
                cap = PackingLayout(backend.slots, c.problem.N * c.model.m, constraint_count(c)).capacity
                batches = max(c.n_batches, -(-c.K // cap))
                rows.append([int(degree), int(log_n), int(K), c.workers, batches, cap, int(steps),
                             mean, std, timing_stats(lg["cloud_ms"])[0],
                             timing_stats(lg["client_ms"])[0]])
                log.info("bench l=%d logN=%d K=%d: %.1f +- %.1f ms", degree, log_n, K, mean, std)
    cols = BENCH_COLUMNS
    data = {c: np.asarray(v, dtype=int if c in INT_COLUMNS else float)
            for c, v in zip(cols, zip(*rows))}
    return Table(cols, data)
