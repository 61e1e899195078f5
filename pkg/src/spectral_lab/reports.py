"""CSV + JSON sidecar persistence for reports."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def emit_report(report, path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.csv`` from ``report.table()`` and ``<path>.json`` from ``report.summary()``.

    ``report`` may also be a ``(columns, rows, summary)`` tuple.
    """
    if isinstance(report, tuple):
        columns, rows, summary = report
    else:
        columns, rows = report.table()
        summary = report.summary()
    meta = dict(summary)
    if extra:
        meta.update(extra)
    base = Path(path)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    csv_path.write_text(csv_text(columns, rows))
    json_path.write_text(json.dumps(to_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        columns = next(r)
        rows = [[float(v) for v in row] for row in r]
    return columns, np.array(rows, dtype=float).reshape(-1, len(columns))
