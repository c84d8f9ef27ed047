"""Report persistence: atomic JSON, CSV fields and measures, two-column plot data."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def to_jsonable(obj):
    """Plain-JSON copy of ``obj``; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj):
    return atomic_write_text(path, dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_field_csv(path, grid, columns):
    """Node coordinates followed by named value columns (dict name -> array)."""
    d = grid.dimension
    header = ["x"] if d == 1 else ["x", "y"]
    names = list(columns)
    header += names
    data = [np.asarray(columns[n], float) for n in names]
    rows = [[*grid.points[i].tolist(), *(col[i] for col in data)] for i in range(grid.n)]
    return atomic_write_text(path, _csv_text(header, rows))


def read_field_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    return header, rows


def write_measure_csv(path, measure):
    d = measure.grid.dimension
    header = (["x", "v"] if d == 1 else ["x", "y", "vx", "vy"]) + ["weight"]
    return atomic_write_text(path, _csv_text(header, measure.rows()))


def write_columns(path, x, y, comment=None):
    """Two-column whitespace-separated data for gnuplot."""
    lines = [] if comment is None else [f"# {comment}"]
    lines += [f"{float(a)!r} {float(b)!r}" for a, b in zip(np.ravel(x), np.ravel(y))]
    return atomic_write_text(path, "\n".join(lines) + "\n")
