"""Cloud role: offline perturbation cache and the encrypted online step.

The cloud owns the noise draws ``xi`` in the clear and only ever sees
ciphertexts plus public evaluation keys.  Worker-batches are independent and
run on a fixed-size thread pool.
"""

from __future__ import annotations

import logging
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..ckks.scheme import KeyBundle, SecretKey
from ..errors import ConfigurationError, CryptoError, VempcError
from ..he_backend import HeBackend, HeEvaluator, evaluator_from_setup
from ..mpc_core.rng import derive_seed, standard_normal
from .layout import PackingLayout, plan_batches
from .messages import (ByeMsg, ErrorMsg, OfflineAck, OfflineClientMsg, OnlineRequest,
                       OnlineResponse, SetupMsg, params_hash, parse_frame, transport_frame)

log = logging.getLogger(__name__)


def resolve_workers(n_workers: Optional[int] = None) -> int:
    """``VEMPC_WORKERS`` overrides the configured pool size."""
    env = os.environ.get("VEMPC_WORKERS")
    if env:
        try:
            n_workers = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"VEMPC_WORKERS={env!r} is not an integer") from exc
    n = 1 if n_workers is None else int(n_workers)
    if n < 1:
        raise ConfigurationError("n_workers must be >= 1")
    return n


def holds_secret(obj, _seen=None) -> bool:
    """True if ``obj`` reaches a secret key through its attributes."""
    _seen = set() if _seen is None else _seen
    if id(obj) in _seen:
        return False
    _seen.add(id(obj))
    if isinstance(obj, (SecretKey, KeyBundle, HeBackend)):
        return True
    if isinstance(obj, dict):
        return any(holds_secret(v, _seen) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(holds_secret(v, _seen) for v in obj)
    if type(obj).__module__.startswith("vempc") and hasattr(obj, "__dict__"):
        return any(holds_secret(v, _seen) for v in vars(obj).values())
    return False


@dataclass(frozen=True)
class CacheEntry:
    """One worker-batch: samples ``start .. start + count - 1``."""

    start: int
    count: int
    xi: np.ndarray
    c_lu: object
    c_gamma: object


@dataclass(frozen=True)
class CloudConfig:
    dim: int
    p: int
    K: int
    seed: int
    coeffs: tuple
    batches: Optional[int] = None
    refresh_every: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "CloudConfig":
        return cls(dim=int(d["dim"]), p=int(d["p"]), K=int(d["K"]), seed=int(d["seed"]),
                   coeffs=tuple(float(c) for c in d["coeffs"]),
                   batches=None if d.get("batches") is None else int(d["batches"]),
                   refresh_every=int(d.get("refresh_every", 0)))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "p": self.p, "K": self.K, "seed": self.seed,
                "coeffs": list(self.coeffs), "batches": self.batches,
                "refresh_every": self.refresh_every}


class VempcCloud:
    """Evaluates the protocol's encrypted steps with public material only."""

    def __init__(self, evaluator: HeEvaluator, config: CloudConfig, n_workers: Optional[int] = None):
        if holds_secret(evaluator):
            raise CryptoError("the cloud must not hold secret-key material")
        self.ev = evaluator
        self.config = config
        self.layout = PackingLayout(evaluator.slots, config.dim, config.p)
        self.hash = params_hash(evaluator.descriptor(), config.dim, config.p)
        self.n_workers = resolve_workers(n_workers)
        self.plan = plan_batches(config.K, self.layout.capacity, config.batches)
        degree = len(config.coeffs) - 1
        if evaluator.depth < degree + 1:
            raise ConfigurationError(
                f"depth {evaluator.depth} cannot host one offline product and a degree-{degree} polynomial")
        missing = [r for r in self.layout.reduction_rotations() if not evaluator.has_rotation(r)]
        if missing:
            raise CryptoError(f"missing rotation keys for shifts {missing}")
        self._columns = None
        self.cache: list = []
        self._epoch = 0
        self._last_step = -1

    @classmethod
    def from_setup(cls, msg: SetupMsg, n_workers: Optional[int] = None) -> "VempcCloud":
        ev = evaluator_from_setup(msg.descriptor, msg.eval_keys)
        return cls(ev, CloudConfig.from_dict(msg.config), n_workers)

    def _map(self, fn, items):
        if self.n_workers == 1 or len(items) == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.n_workers) as pool:
            return list(pool.map(fn, items))

    def _check_hash(self, h: int) -> None:
        if h != self.hash:
            raise CryptoError(f"params hash mismatch: got {h:#018x}, expected {self.hash:#018x}")

    # -- offline ---------------------------------------------------------------
    def offline(self, msg: OfflineClientMsg) -> OfflineAck:
        self._check_hash(msg.params_hash)
        if len(msg.lu_columns) != self.config.dim or len(msg.gamma_columns) != self.config.dim:
            raise ConfigurationError("offline message must carry one column per input coordinate")
        lu = [self.ev.deserialize_ct(b) for b in msg.lu_columns]
        gamma = [self.ev.deserialize_ct(b) for b in msg.gamma_columns]
        self._columns = (lu, gamma)
        self._rebuild_cache(self.config.seed)
        return OfflineAck(self.hash, [(e.start, e.count) for e in self.cache])

    def _rebuild_cache(self, seed: int) -> None:
        lu, gamma = self._columns
        lay = self.layout
        dim = self.config.dim

        def build(batch):
            start, count = batch
            xi = standard_normal(seed, count, dim, start=start)
            c_lu = self.ev.dot_pt(lu, [lay.broadcast_u(xi[:, j]) for j in range(dim)])
            c_g = self.ev.dot_pt(gamma, [lay.broadcast_p(xi[:, j]) for j in range(dim)])
            return CacheEntry(start, count, xi, c_lu, c_g)

        self.cache = self._map(build, self.plan)

    def export_cache(self) -> bytes:
        """Cache entries as ``u32 count`` then ``(start, count, c_LU blob, c_Gamma blob)``."""
        parts = [struct.pack("<I", len(self.cache))]
        for e in self.cache:
            lu, g = self.ev.serialize_ct(e.c_lu), self.ev.serialize_ct(e.c_gamma)
            parts.append(struct.pack("<IIII", e.start, e.count, len(lu), len(g)) + lu + g)
        return b"".join(parts)

    # -- online ----------------------------------------------------------------
    def online(self, req: OnlineRequest) -> OnlineResponse:
        t0 = time.perf_counter()
        self._check_hash(req.params_hash)
        if not self.cache:
            raise ConfigurationError("offline phase has not been run")
        if req.step <= self._last_step:
            raise ConfigurationError(f"step {req.step} is not after {self._last_step}")
        self._last_step = req.step
        refresh = self.config.refresh_every
        if refresh and req.step and req.step // refresh != self._epoch:
            self._epoch = req.step // refresh
            self._rebuild_cache(derive_seed(self.config.seed, self._epoch))
        mean = self.ev.deserialize_ct(req.mean_ct)
        offset = self.ev.deserialize_ct(req.offset_ct)
        coeffs = list(self.config.coeffs)
        coeffs[0] = 0.0  # the client adds p * c_0, keeping zero padding at zero
        stride = self.layout.p_stride

        def step(entry: CacheEntry):
            u_ct = self.ev.drop_to_level(self.ev.add_ct(mean, entry.c_lu), 0)
            g_ct = self.ev.add_ct(offset, entry.c_gamma)
            s_ct = self.ev.sum_reduce_segments(self.ev.eval_poly(g_ct, coeffs), stride)
            s_ct = self.ev.drop_to_level(s_ct, 0)
            return (entry.start, entry.count, self.ev.serialize_ct(u_ct), self.ev.serialize_ct(s_ct))

        batches = self._map(step, self.cache)
        ms = (time.perf_counter() - t0) * 1e3
        return OnlineResponse(self.hash, req.step, batches, ms)


class CloudService:
    """Frame-level dispatcher; starts unconfigured and is set up by the client."""

    def __init__(self, n_workers: Optional[int] = None):
        self.n_workers = n_workers
        self.cloud: Optional[VempcCloud] = None
        self.closed = False

    def handle(self, frame: bytes) -> bytes:
        try:
            msg = parse_frame(frame)
            if isinstance(msg, SetupMsg):
                self.cloud = VempcCloud.from_setup(msg, self.n_workers)
                reply = OfflineAck(self.cloud.hash, [])
            elif isinstance(msg, ByeMsg):
                self.closed = True
                reply = ByeMsg()
            elif self.cloud is None:
                raise ConfigurationError("cloud has not been set up")
            elif isinstance(msg, OfflineClientMsg):
                reply = self.cloud.offline(msg)
            elif isinstance(msg, OnlineRequest):
                reply = self.cloud.online(msg)
            else:
                raise ConfigurationError(f"unexpected message {type(msg).__name__}")
        except VempcError as exc:
            log.error("cloud error: %s", exc)
            reply = ErrorMsg(f"{type(exc).__name__}: {exc}")
        return transport_frame(reply)
