"""Key directories: parameters, secret, public and evaluation keys on disk."""

from __future__ import annotations

import json
from pathlib import Path

from ..ckks import serialize
from ..ckks.params import CkksParams
from ..ckks.scheme import KeyBundle, PublicKey, SecretKey, keygen
from ..errors import ConfigurationError, SerializationError

PARAMS_FILE = "params.json"
SECRET_FILE = "secret.key"
PUBLIC_FILE = "public.key"
EVAL_FILE = "evaluation.keys"
MANIFEST_FILE = "manifest.json"


def write_keys(out, params: CkksParams, seed: int, rotations) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = keygen(params, seed, rotations)
    (out / PARAMS_FILE).write_text(json.dumps(params.to_dict(), indent=2, sort_keys=True))
    (out / SECRET_FILE).write_bytes(serialize.dumps(bundle.secret))
    (out / PUBLIC_FILE).write_bytes(serialize.dumps(bundle.public))
    (out / EVAL_FILE).write_bytes(serialize.dump_evaluation_keys(bundle.evaluation))
    manifest = {"seed": seed, "rotations": sorted({int(r) for r in rotations}),
                "galois": sorted(bundle.evaluation.rotations)}
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2))
    return out


def read_keys(directory) -> tuple:
    """Return ``(params, bundle, manifest)`` from a key directory."""
    d = Path(directory)
    try:
        params = CkksParams.from_dict(json.loads((d / PARAMS_FILE).read_text()))
        manifest = json.loads((d / MANIFEST_FILE).read_text())
        secret = serialize.loads((d / SECRET_FILE).read_bytes())
        public = serialize.loads((d / PUBLIC_FILE).read_bytes())
        evaluation = serialize.load_evaluation_keys((d / EVAL_FILE).read_bytes())
    except OSError as exc:
        raise ConfigurationError(f"incomplete key directory {d}: {exc}") from exc
    if not isinstance(secret, SecretKey) or not isinstance(public, PublicKey):
        raise SerializationError(f"key files in {d} hold the wrong object types")
    return params, KeyBundle(secret, public, evaluation), manifest
