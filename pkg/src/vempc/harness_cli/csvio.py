"""CSV emission with exact float roundtrip."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .sim import INT_COLUMNS, Table


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def emit_csv(table: Table, path) -> Path:
    """Header row then one row per entry, columns in ``table.columns`` order."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(table.columns)
        for row in table.rows():
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> Table:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        rows = list(r)
    data = {}
    for j, c in enumerate(header):
        kind = int if c in INT_COLUMNS else float
        data[c] = np.array([kind(row[j]) for row in rows], dtype=kind)
    return Table(header, data)
