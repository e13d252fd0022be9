"""Backend contract, a calibrated noisy mock, and the CKKS adapter."""

from __future__ import annotations

import json

from ..ckks.params import CkksParams
from ..errors import ConfigurationError
from .base import HeBackend, HeEvaluator, NoiseModel
from .ckks_backend import CkksBackend, CkksEvaluator, ckks_evaluator_from_blob
from .mock import MockBackend, MockCiphertext, MockEvaluator, mock_evaluator_from_blob

BACKENDS = ("mock", "ckks")


def make_backend(kind: str, **options) -> HeBackend:
    """Build a key-holding backend from its selection string.

    ``mock`` accepts ``slots``, ``depth``, ``noise`` and ``seed``; ``ckks``
    accepts ``params``, ``seed``, ``rotations`` and ``bounds``.
    """
    if kind == "mock":
        return MockBackend(**options)
    if kind == "ckks":
        return CkksBackend(**options)
    raise ConfigurationError(f"unknown backend {kind!r}; expected one of {BACKENDS}")


def evaluator_from_setup(descriptor: bytes, blob: bytes) -> HeEvaluator:
    """Rebuild a remote evaluator from a backend descriptor and its public key blob."""
    d = json.loads(descriptor.decode())
    if d.get("backend") == "mock":
        return mock_evaluator_from_blob(descriptor)
    if d.get("backend") == "ckks":
        return ckks_evaluator_from_blob(CkksParams.from_dict(d["params"]), blob)
    raise ConfigurationError(f"unknown backend descriptor {d.get('backend')!r}")


__all__ = [
    "BACKENDS", "CkksBackend", "CkksEvaluator", "HeBackend", "HeEvaluator", "MockBackend",
    "MockCiphertext", "MockEvaluator", "NoiseModel", "ckks_evaluator_from_blob",
    "evaluator_from_setup",
    "make_backend", "mock_evaluator_from_blob",
]
