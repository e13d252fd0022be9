"""Client role: key owner, request builder and estimator."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, CryptoError
from ..he_backend import HeBackend
from ..mpc_core.estimator import effective_sample_size, estimate_or_fallback
from ..mpc_core.surrogate import Surrogate, WeightRule, threshold_weight
from ..mpc_core.tilt import TiltedGaussian
from .cloud import CloudConfig
from .layout import PackingLayout
from .messages import (ByeMsg, ErrorMsg, OfflineAck, OfflineClientMsg, OnlineRequest, OnlineResponse,
                       SetupMsg, params_hash, parse_frame, transport_frame)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepResult:
    U_hat: np.ndarray
    u0: np.ndarray
    samples: np.ndarray
    scores: np.ndarray
    weights: np.ndarray
    fell_back: bool
    ess: float
    client_ms: float = 0.0
    cloud_ms: float = 0.0
    total_ms: float = 0.0


class VempcClient:
    def __init__(self, backend: HeBackend, tg: TiltedGaussian, surrogate: Surrogate,
                 rule: WeightRule, K: int, seed: int, m: int = 1,
                 batches: Optional[int] = None, refresh_every: int = 0):
        self.be = backend
        self.tg = tg
        self.surrogate = surrogate
        self.rule = rule
        self.m = m
        self.layout = PackingLayout(backend.slots, tg.dim, tg.p)
        self.config = CloudConfig(dim=tg.dim, p=tg.p, K=int(K), seed=int(seed),
                                  coeffs=tuple(float(c) for c in surrogate.coeffs),
                                  batches=batches, refresh_every=refresh_every)
        self.hash = params_hash(backend.descriptor(), tg.dim, tg.p)
        self._step = -1
        self._pending: Optional[tuple] = None
        self.batches: list = []

    def setup_message(self) -> SetupMsg:
        return SetupMsg(self.be.descriptor(), self.be.evaluation_blob(), self.config.to_dict())

    def offline_message(self) -> OfflineClientMsg:
        lay, be = self.layout, self.be
        lu = [be.serialize_ct(be.encrypt(lay.replicate_u(self.tg.L_U[:, j])))
              for j in range(self.tg.dim)]
        gamma = [be.serialize_ct(be.encrypt(lay.replicate_p(self.tg.Gamma[:, j])))
                 for j in range(self.tg.dim)]
        return OfflineClientMsg(self.hash, lu, gamma)

    def accept_offline(self, ack: OfflineAck) -> None:
        if ack.params_hash != self.hash:
            raise CryptoError("offline acknowledgement carries a foreign params hash")
        self.batches = list(ack.batches)

    def online_request(self, x0, step: int) -> OnlineRequest:
        if step <= self._step:
            raise ConfigurationError(f"step {step} is not after {self._step}")
        x0 = np.asarray(x0, dtype=float)
        mean = self.tg.mean(x0)
        offset = self.tg.offset(x0)
        level = self.be.depth - 1
        m_ct = self.be.encrypt(self.layout.replicate_u(mean), level=level)
        b_ct = self.be.encrypt(self.layout.replicate_p(offset), level=level)
        self._step = step
        self._pending = (step, mean)
        return OnlineRequest(self.hash, step, self.be.serialize_ct(m_ct), self.be.serialize_ct(b_ct))

    def finalize(self, resp: OnlineResponse) -> StepResult:
        if resp.params_hash != self.hash:
            raise CryptoError("response carries a foreign params hash")
        if self._pending is None or resp.step != self._pending[0]:
            raise ConfigurationError("response does not answer the pending request")
        _, mean = self._pending
        self._pending = None
        lay = self.layout
        U_parts, s_parts = [], []
        for start, count, u_blob, s_blob in sorted(resp.batches, key=lambda b: b[0]):
            U_parts.append(lay.extract_u(self.be.decrypt(self.be.deserialize_ct(u_blob)), count))
            s_parts.append(lay.extract_starts(self.be.decrypt(self.be.deserialize_ct(s_blob)), count))
        U = np.vstack(U_parts)
        scores = np.concatenate(s_parts) + self.tg.p * float(self.surrogate.coeffs[0])
        _, weights = threshold_weight(self.rule, scores)
        U_hat, fell_back = estimate_or_fallback(U, weights, mean)
        return StepResult(U_hat, U_hat[:self.m].copy(), U, scores, weights, fell_back,
                          effective_sample_size(weights))


class Channel:
    """Frame exchange with a cloud, counting messages in each direction."""

    def __init__(self):
        self.sent: dict = {}
        self.received: dict = {}

    def _count(self, table: dict, frame: bytes) -> None:
        kind = frame[4]
        table[kind] = table.get(kind, 0) + 1

    def exchange(self, frame: bytes) -> bytes:
        self._count(self.sent, frame)
        reply = self._exchange(frame)
        self._count(self.received, reply)
        return reply

    def _exchange(self, frame: bytes) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessChannel(Channel):
    def __init__(self, service):
        super().__init__()
        self.service = service

    def _exchange(self, frame: bytes) -> bytes:
        return self.service.handle(frame)


class ProtocolSession:
    """Drives setup, offline and online phases over a :class:`Channel`."""

    def __init__(self, client: VempcClient, channel: Channel):
        self.client = client
        self.channel = channel
        self._next_step = 0

    def _call(self, msg, expect):
        reply = parse_frame(self.channel.exchange(transport_frame(msg)))
        if isinstance(reply, ErrorMsg):
            raise CryptoError(f"cloud reported: {reply.text}")
        if not isinstance(reply, expect):
            raise ConfigurationError(f"expected {expect.__name__}, got {type(reply).__name__}")
        return reply

    def setup(self) -> None:
        ack = self._call(self.client.setup_message(), OfflineAck)
        if ack.params_hash != self.client.hash:
            raise CryptoError("cloud derived a different params hash")

    def offline(self, msg: Optional[OfflineClientMsg] = None) -> None:
        """Run the offline phase; ``msg`` replays previously stored client ciphertexts."""
        msg = self.client.offline_message() if msg is None else msg
        self.client.accept_offline(self._call(msg, OfflineAck))

    def start(self, offline_msg: Optional[OfflineClientMsg] = None) -> "ProtocolSession":
        self.setup()
        self.offline(offline_msg)
        return self

    def step(self, x0) -> StepResult:
        t0 = time.perf_counter()
        req = self.client.online_request(x0, self._next_step)
        t1 = time.perf_counter()
        resp = self._call(req, OnlineResponse)
        t2 = time.perf_counter()
        res = self.client.finalize(resp)
        t3 = time.perf_counter()
        self._next_step += 1
        client_ms = ((t1 - t0) + (t3 - t2)) * 1e3
        return StepResult(**{**res.__dict__, "client_ms": client_ms, "cloud_ms": resp.cloud_ms,
                             "total_ms": (t3 - t0) * 1e3})

    def close(self) -> None:
        try:
            self.channel.exchange(transport_frame(ByeMsg()))
        finally:
            self.channel.close()
