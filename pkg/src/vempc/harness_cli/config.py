"""Versioned JSON run configuration.

Matrices are row-major nested arrays; a bare number stands for a multiple of
the identity wherever a square matrix is expected.  :func:`load_config`
validates the document, fills every default and keeps the filled document in
``SimConfig.echo`` so runs can print exactly what they used.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from ..ckks.params import CkksParams, make_params
from ..errors import ConfigurationError
from ..mpc_core.model import ConstraintSpec, MpcProblem, PlantModel

SCHEMA_VERSION = 1
MODES = ("qp", "variational", "variational-exact", "vempc-mock", "vempc-ckks")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MATRIX = {"anyOf": [_NUM, {"type": "array", "minItems": 1, "items": _VEC}]}
_BOUNDS = {"type": "array", "items": {"anyOf": [_POS, {"type": "null"}]}}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "name": {"type": "string"},
    "plant": _obj({
        "A": _MATRIX, "B": _MATRIX, "dt": _POS,
        "state_names": {"type": "array", "items": {"type": "string"}},
        "input_names": {"type": "array", "items": {"type": "string"}},
        "metadata": {"type": "object"},
    }, required=("A", "B")),
    "problem": _obj({
        "N": _INT_POS, "Q": _MATRIX, "Qf": _MATRIX, "R": _MATRIX,
        "constraints": _obj({"state_bounds": _BOUNDS, "input_bounds": _BOUNDS}),
    }, required=("N", "Q", "R")),
    "sampling": _obj({
        "Sigma0": _MATRIX, "lambda": _POS, "K": _INT_POS,
        "seed": {"type": "integer", "minimum": 0},
    }, required=("Sigma0", "lambda", "K")),
    "surrogate": _obj({
        "degree": _INT_POS,
        "bound": {"anyOf": [{"const": "auto"}, _POS]},
        "z": _POS,
        "operating_box": {"type": "array", "items": _POS},
        "method": {"enum": ["minimax", "interpolate"]},
    }),
    "weights": _obj({
        "tau": {"anyOf": [{"const": "auto"}, {"type": "number", "minimum": 0}]},
        "eta": _POS,
    }),
    "encryption": _obj({
        "log_n": {"type": "integer", "minimum": 4, "maximum": 16},
        "scale_bits": {"type": "number", "minimum": 10, "maximum": 60},
        "depth": {"anyOf": [{"const": "auto"}, _INT_POS]},
        "key_seed": {"type": "integer", "minimum": 0},
        "mock_noise": {"type": "array", "items": {"type": "number", "minimum": 0},
                       "minItems": 3, "maxItems": 3},
    }),
    "protocol": _obj({
        "workers": _INT_POS,
        "batches": {"anyOf": [{"const": "workers"}, _INT_POS]},
        "refresh_every": {"type": "integer", "minimum": 0},
    }),
    "simulation": _obj({
        "T": _INT_POS, "x0": _VEC, "mode": {"enum": list(MODES)},
    }, required=("x0",)),
}, required=("schema_version", "plant", "problem", "sampling", "simulation"))

DEFAULTS = {
    "name": "unnamed",
    "plant": {"dt": 1.0, "metadata": {}},
    "problem": {"constraints": {}},
    "sampling": {"seed": 0},
    "surrogate": {"degree": 3, "bound": "auto", "z": 4.0, "method": "minimax"},
    "weights": {"tau": "auto", "eta": 1e3},
    "encryption": {"log_n": 13, "scale_bits": 30, "depth": "auto", "key_seed": 0,
                   "mock_noise": [0.0, 0.0, 0.0]},
    "protocol": {"workers": 1, "batches": "workers", "refresh_every": 0},
    "simulation": {"T": 40, "mode": "qp"},
}


@dataclass(frozen=True)
class SimConfig:
    """Validated run configuration with every default resolved."""

    name: str
    model: PlantModel
    problem: MpcProblem
    Sigma0: np.ndarray
    lam: float
    K: int
    seed: int
    x0: np.ndarray
    T: int = 40
    mode: str = "qp"
    state_names: tuple = ()
    input_names: tuple = ()
    degree: int = 3
    bound: Optional[float] = None  # None: derived from the operating box
    z: float = 4.0
    operating_box: Optional[np.ndarray] = None
    fit_method: str = "minimax"
    tau: Optional[float] = None  # None: p * delta (+ B_s when encrypted)
    eta: float = 1e3
    log_n: int = 13
    scale_bits: float = 30
    depth: Optional[int] = None  # None: degree + 1
    key_seed: int = 0
    mock_noise: tuple = (0.0, 0.0, 0.0)
    workers: int = 1
    batches: Optional[int] = None  # None: one batch per worker
    refresh_every: int = 0
    metadata: dict = field(default_factory=dict)
    echo: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"simulation.mode: unknown mode {self.mode!r}; expected one of {MODES}")
        if self.T < 1:
            raise ConfigurationError("simulation.T: must be >= 1")

    def with_overrides(self, **changes) -> "SimConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @property
    def n_batches(self) -> int:
        return self.workers if self.batches is None else self.batches

    @property
    def he_depth(self) -> int:
        return self.degree + 1 if self.depth is None else self.depth

    def ckks_params(self) -> CkksParams:
        return make_params(self.log_n, self.he_depth, self.scale_bits)


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [r for r in err.validator_value if r not in err.instance]
        return ".".join(parts + missing[:1])
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return ".".join(parts + extra[:1])
    return ".".join(parts) or "<root>"


def schema_errors(doc) -> list:
    """All structural violations as ``"field.path: message"`` strings."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [f"{_path(e)}: {e.message}" for e in errors]


def _square(value, n: int, where: str) -> np.ndarray:
    if np.isscalar(value):
        return float(value) * np.eye(n)
    try:
        arr = np.array(value, dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: ragged matrix") from exc
    if arr.shape != (n, n):
        raise ConfigurationError(f"{where}: expected shape ({n}, {n}), got {arr.shape}")
    return arr


def _matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.array(value, dtype=float))
    except ValueError as exc:
        raise ConfigurationError(f"{where}: ragged matrix") from exc
    if arr.ndim != 2:
        raise ConfigurationError(f"{where}: expected a matrix")
    return arr


def _bounds(value, length: int, where: str):
    if value is None:
        return None
    if len(value) != length:
        raise ConfigurationError(f"{where}: expected {length} entries, got {len(value)}")
    return [None if v is None else float(v) for v in value]


def from_document(doc: dict) -> SimConfig:
    """Validate a parsed document and build the config."""
    errors = schema_errors(doc)
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
    full = _merge(DEFAULTS, doc)
    plant, prob, samp = full["plant"], full["problem"], full["sampling"]
    sur, enc, proto, sim = full["surrogate"], full["encryption"], full["protocol"], full["simulation"]

    A = _matrix(plant["A"], "plant.A")
    n = A.shape[0]
    B = _matrix(plant["B"], "plant.B")
    if B.shape[0] != n and B.shape[1] == n and B.shape[0] == 1:
        B = B.T  # a flat input column written as one row
    try:
        model = PlantModel(A, B, float(plant["dt"]))
    except ConfigurationError as exc:
        raise ConfigurationError(f"plant: {exc}") from exc
    m = model.m
    Q = _square(prob["Q"], n, "problem.Q")
    Qf = _square(prob.get("Qf", prob["Q"]), n, "problem.Qf")
    R = _square(prob["R"], m, "problem.R")
    cons = prob["constraints"]
    spec = ConstraintSpec(_bounds(cons.get("state_bounds"), n, "problem.constraints.state_bounds"),
                          _bounds(cons.get("input_bounds"), m, "problem.constraints.input_bounds"))
    try:
        problem = MpcProblem(prob["N"], Q, Qf, R, spec)
    except ConfigurationError as exc:
        raise ConfigurationError(f"problem: {exc}") from exc
    full["problem"].setdefault("Qf", Qf.tolist())

    Sigma0 = _square(samp["Sigma0"], problem.N * m, "sampling.Sigma0")
    if np.linalg.eigvalsh((Sigma0 + Sigma0.T) / 2).min() <= 0:
        raise ConfigurationError("sampling.Sigma0: must be positive definite")
    x0 = np.asarray(sim["x0"], dtype=float)
    if x0.shape != (n,):
        raise ConfigurationError(f"simulation.x0: expected {n} entries, got {x0.size}")

    box = sur.get("operating_box")
    if box is None and spec.state_bounds is not None and all(b is not None for b in spec.state_bounds):
        box = list(spec.state_bounds)
    if box is not None and len(box) != n:
        raise ConfigurationError(f"surrogate.operating_box: expected {n} entries")
    if sur["bound"] == "auto" and box is None:
        raise ConfigurationError("surrogate.operating_box: required when bound is auto "
                                 "and some state is unbounded")
    if box is not None:
        full["surrogate"]["operating_box"] = list(box)

    names_x = tuple(plant.get("state_names") or [f"x{i + 1}" for i in range(n)])
    names_u = tuple(plant.get("input_names") or [f"u{i + 1}" for i in range(m)])
    if len(names_x) != n:
        raise ConfigurationError(f"plant.state_names: expected {n} names")
    if len(names_u) != m:
        raise ConfigurationError(f"plant.input_names: expected {m} names")

    return SimConfig(
        name=full["name"], model=model, problem=problem, Sigma0=Sigma0,
        lam=float(samp["lambda"]), K=int(samp["K"]), seed=int(samp["seed"]), x0=x0,
        T=int(sim["T"]), mode=sim["mode"], state_names=names_x, input_names=names_u,
        degree=int(sur["degree"]),
        bound=None if sur["bound"] == "auto" else float(sur["bound"]),
        z=float(sur["z"]), operating_box=None if box is None else np.asarray(box, dtype=float),
        fit_method=sur["method"],
        tau=None if full["weights"]["tau"] == "auto" else float(full["weights"]["tau"]),
        eta=float(full["weights"]["eta"]),
        log_n=int(enc["log_n"]), scale_bits=float(enc["scale_bits"]),
        depth=None if enc["depth"] == "auto" else int(enc["depth"]),
        key_seed=int(enc["key_seed"]), mock_noise=tuple(float(e) for e in enc["mock_noise"]),
        workers=int(proto["workers"]),
        batches=None if proto["batches"] == "workers" else int(proto["batches"]),
        refresh_every=int(proto["refresh_every"]),
        metadata=dict(plant["metadata"]), echo=full)


def load_config(path) -> SimConfig:
    """Read, validate and default-fill a configuration file.

    Raises
    ------
    ConfigurationError
        If the file is missing, is not JSON, or violates the schema; the
        message lists each offending field path (e.g. ``problem.R``).
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}: not valid JSON ({exc})") from exc
    return from_document(doc)


def bundled_config_path(name: str = "pendulum") -> Path:
    return Path(str(resources.files(__package__).joinpath("configs", f"{name}.json")))


def load_bundled(name: str = "pendulum") -> SimConfig:
    return load_config(bundled_config_path(name))
