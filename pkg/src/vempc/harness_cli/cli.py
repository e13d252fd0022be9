"""``vempc`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical or crypto error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..ckks.params import CkksParams, make_params
from ..errors import ConfigurationError, CryptoError, NumericalError, VempcError
from ..he_backend import CkksBackend
from ..protocol import (CloudService, InProcessChannel, OfflineClientMsg, PackingLayout,
                        ProtocolSession, SocketChannel, parse_frame, serve,
                        transport_frame)
from .config import MODES, SimConfig, from_document, load_config
from .csvio import emit_csv
from .keys import read_keys, write_keys
from .sim import (VEMPC_MODES, bench_ablation, build_backend, closed_loop_run, compare_modes,
                  constraint_count, make_client, prepare, timing_stats)

log = logging.getLogger("vempc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
OFFLINE_FRAME = "offline.frame"
CACHE_FILE = "cache.bin"
CACHE_MANIFEST = "cache.json"


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected comma-separated integers, got {text!r}") from exc


def _modes(text: str) -> list:
    modes = [t.strip() for t in text.split(",") if t.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigurationError(f"unknown modes {bad}; expected some of {MODES}")
    return modes


def _rotations(cfg: SimConfig) -> list:
    slots = 1 << (cfg.log_n - 1)
    return PackingLayout(slots, cfg.problem.N * cfg.model.m, constraint_count(cfg)).reduction_rotations()


def _params_from_file(path, seed, rotations_arg):
    """Accept a run config, a full parameter set, or ``{log_n, depth, scale_bits}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read parameters from {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    if "schema_version" in doc:
        cfg = from_document(doc)
        params, default_rot, default_seed = cfg.ckks_params(), _rotations(cfg), cfg.key_seed
    elif "base_primes" in doc:
        params, default_rot, default_seed = CkksParams.from_dict(doc), [1 << k for k in range(6)], 0
    else:
        unknown = set(doc) - {"log_n", "depth", "scale_bits"}
        if unknown:
            raise ConfigurationError(f"{path}: unknown parameter fields {sorted(unknown)}")
        params = make_params(int(doc.get("log_n", 13)), int(doc.get("depth", 4)),
                             float(doc.get("scale_bits", 30)))
        default_rot, default_seed = [1 << k for k in range(6)], 0
    rotations = default_rot if rotations_arg in (None, "auto") else _ints(rotations_arg)
    return params, default_seed if seed is None else seed, rotations


def _backend_from_keys(cfg: SimConfig, keys_dir) -> CkksBackend:
    params, bundle, _ = read_keys(keys_dir)
    want = cfg.ckks_params()
    if params.to_dict() != want.to_dict():
        raise ConfigurationError(f"keys in {keys_dir} were made for log_n={params.log_n}, "
                                 f"depth={params.depth}; config needs log_n={cfg.log_n}, "
                                 f"depth={cfg.he_depth}")
    return CkksBackend(params, seed=cfg.key_seed, keys=bundle)


def _summary(lg) -> dict:
    out = {"mode": lg.meta["mode"], "steps": len(lg), "violations": lg.violations(),
           "final_state": [float(v) for v in lg.meta["final_state"]],
           "fallbacks": int(np.sum(lg["fell_back"]))}
    if len(lg) > 1:
        mean, std = timing_stats(lg["total_ms"])
        out.update(online_mean_ms=mean, online_std_ms=std)
    if "budget" in lg.meta:
        b = lg.meta["budget"]
        out.update(B_U=b.B_U, B_s=b.B_s, tau=lg.meta["tau"],
                   max_err_U=float(np.max(lg["err_U"])), max_err_s=float(np.max(lg["err_s"])))
    return out


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


# -- commands ---------------------------------------------------------------
def cmd_keygen(args) -> int:
    params, seed, rotations = _params_from_file(args.params, args.seed, args.rotations)
    out = write_keys(args.out, params, seed, rotations)
    _print({"keys": str(out), "log_n": params.log_n, "depth": params.depth,
            "rotations": rotations, "seed": seed})
    return EXIT_OK


def cmd_offline(args) -> int:
    cfg = load_config(args.config)
    backend = _backend_from_keys(cfg, args.keys)
    client, _ = make_client(cfg, prepare(cfg), backend)
    service = CloudService(cfg.workers)
    msg = client.offline_message()
    ProtocolSession(client, InProcessChannel(service)).start(msg)
    cache = Path(args.cache)
    cache.mkdir(parents=True, exist_ok=True)
    (cache / OFFLINE_FRAME).write_bytes(transport_frame(msg))
    (cache / CACHE_FILE).write_bytes(service.cloud.export_cache())
    manifest = {"params_hash": f"{client.hash:#018x}", "K": cfg.K, "seed": cfg.seed,
                "batches": [list(b) for b in client.batches]}
    (cache / CACHE_MANIFEST).write_text(json.dumps(manifest, indent=2))
    _print({"cache": str(cache), **manifest})
    return EXIT_OK


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    return cfg.with_overrides(seed=getattr(args, "seed", None), workers=getattr(args, "workers", None),
                              T=getattr(args, "steps", None))


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    mode = args.mode or cfg.mode
    backend, offline_msg = None, None
    if args.keys:
        if mode != "vempc-ckks":
            raise ConfigurationError("--keys only applies to mode vempc-ckks")
        backend = _backend_from_keys(cfg, args.keys)
    if args.cache:
        if backend is None:
            raise ConfigurationError("--cache needs --keys (the cached ciphertexts belong to them)")
        offline_msg = parse_frame((Path(args.cache) / OFFLINE_FRAME).read_bytes())
        if not isinstance(offline_msg, OfflineClientMsg):
            raise ConfigurationError(f"{args.cache}/{OFFLINE_FRAME} is not an offline message")
    lg = closed_loop_run(cfg, mode, backend=backend, offline_msg=offline_msg)
    if args.out:
        emit_csv(lg, args.out)
    _print(_summary(lg))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    table = bench_ablation(cfg, _ints(args.degrees), _ints(args.logn), _ints(args.K),
                           steps=args.steps or cfg.T)
    if args.out:
        emit_csv(table, args.out)
    _print([dict(zip(table.columns, map(float, row))) for row in table.rows()])
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = compare_modes(cfg, _modes(args.modes), reference=args.reference)
    if args.out:
        emit_csv(report.table, args.out)
    _print(report.summary)
    return EXIT_OK


def cmd_cloud(args) -> int:
    def ready(addr):
        print(f"listening on {addr[0]}:{addr[1]}", flush=True)
    serve(args.listen, args.workers, connections=args.connections, ready=ready)
    return EXIT_OK


def cmd_client(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    mode = args.mode or "vempc-ckks"
    if mode not in VEMPC_MODES:
        raise ConfigurationError(f"client mode must be one of {VEMPC_MODES}")
    backend = _backend_from_keys(cfg, args.keys) if args.keys else build_backend(cfg, mode)
    lg = closed_loop_run(cfg, mode, backend=backend, channel=SocketChannel(args.connect))
    if args.out:
        emit_csv(lg, args.out)
    _print(_summary(lg))
    return EXIT_OK


def cmd_show_config(args) -> int:
    _print(load_config(args.config).echo)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vempc", description="Variational encrypted MPC harness")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate CKKS keys into a directory")
    p.add_argument("--params", required=True, help="run config or parameter JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--rotations", help="comma-separated slot shifts, or 'auto'")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("offline", help="run the offline phase and store its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--cache", required=True)
    p.set_defaults(fn=cmd_offline)

    p = sub.add_parser("run", help="closed-loop simulation in one mode")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--steps", type=int, help="override simulation.T")
    p.add_argument("--keys")
    p.add_argument("--cache")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="online-time ablation over degree, ring size and K")
    p.add_argument("--config", required=True)
    p.add_argument("--degrees", default="3,4,5")
    p.add_argument("--logn", default="13,14")
    p.add_argument("--K", default="120,240")
    p.add_argument("--steps", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("compare", help="run several modes with common seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--modes", default="qp,variational,vempc-ckks")
    p.add_argument("--reference")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("cloud", help="serve the cloud role over TCP")
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--workers", type=int)
    p.add_argument("--connections", type=int, default=1)
    p.set_defaults(fn=cmd_cloud)

    p = sub.add_parser("client", help="run the client role against a remote cloud")
    p.add_argument("--connect", required=True, help="host:port")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=VEMPC_MODES)
    p.add_argument("--keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_client)

    p = sub.add_parser("show-config", help="print a config with every default filled")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_show_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, CryptoError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VempcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
