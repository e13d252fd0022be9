"""Closed-loop simulation, benchmarks, configuration and the ``vempc`` CLI."""

from .config import MODES, SimConfig, bundled_config_path, from_document, load_bundled, load_config
from .csvio import emit_csv, read_csv
from .sim import (CompareReport, Design, Table, TrajectoryLog, auto_bound, bench_ablation,
                  build_backend, closed_loop_run, compare_modes, constraint_margin, error_budget,
                  prepare, timing_stats)

__all__ = [
    "MODES", "CompareReport", "Design", "SimConfig", "Table", "TrajectoryLog", "auto_bound",
    "bench_ablation", "build_backend", "bundled_config_path", "closed_loop_run", "compare_modes",
    "constraint_margin", "emit_csv", "error_budget", "from_document", "load_bundled",
    "load_config", "prepare", "read_csv", "timing_stats",
]
