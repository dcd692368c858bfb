"""CSV/JSON serialization for correlation tables, reports and run manifests.

``table.csv`` layout::

    # bosecorr correlation table
    # config_hash: 3f2a...
    # meta: {"source": "itebd", ...}
    tau,d,G
    0.050000000000000003,1,0.0099...

Floats carry 17 significant digits so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .table import CorrelationTable

HEADER = "# bosecorr correlation table"
COLUMNS = ("tau", "d", "G")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    """JSON with NaN/Inf written as explicit nulls."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj) + "\n")
    return path


def table_to_csv(table: CorrelationTable) -> str:
    meta = {k: v for k, v in table.meta.items() if k != "diagnostics"}
    buf = _io.StringIO()
    buf.write(HEADER + "\n")
    if "config_hash" in meta:
        buf.write(f"# config_hash: {meta['config_hash']}\n")
    buf.write("# meta: " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for i, t in enumerate(table.tau):
        ts = fmt(t)
        for d in range(1, table.d_max + 1):
            w.writerow((ts, d, fmt(table.G[i, d - 1])))
    return buf.getvalue()


def write_table(path, table: CorrelationTable) -> Path:
    path = Path(path)
    path.write_text(table_to_csv(table))
    return path


def table_from_csv(text: str) -> CorrelationTable:
    meta: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# meta: "):
            meta = json.loads(line[len("# meta: "):])
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"expected columns {','.join(COLUMNS)}")
    data = rows[1:]
    if not data:
        return CorrelationTable(np.zeros(0), np.zeros((0, 1)), meta)
    taus = np.array([float(r[0]) for r in data])
    ds = np.array([int(r[1]) for r in data])
    gs = np.array([float(r[2]) for r in data])
    if np.any(ds < 1):
        raise ValueError("distance column must start at d=1")
    grid, inv = np.unique(taus, return_inverse=True)
    G = np.zeros((grid.size, ds.max()))
    G[inv, ds - 1] = gs
    return CorrelationTable(grid, G, meta)


def read_table(path) -> CorrelationTable:
    return table_from_csv(Path(path).read_text())


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
