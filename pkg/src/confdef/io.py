"""Deterministic JSON and CSV grid files, written atomically."""

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import GridChart


def to_plain(obj):
    """Recursively turn numpy scalars, arrays, tuples and dataclass dicts into JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, non-finite floats as null."""
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def digest(obj):
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]


def write_atomic(path, text):
    """Write text to path via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def write_json(path, obj):
    return write_atomic(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- CSV grids ----------------------------------------------------------------
#
# Line 1: "# " + JSON metadata (axes, origin, spacings, counts, component shape).
# Line 2: column names, one index and one coordinate column per axis, then the
# flattened components. Rows follow numpy C order over the grid.


def grid_csv_text(values, chart, names=None, meta=None):
    values = np.asarray(values, dtype=float)
    gshape = tuple(chart.counts)
    if values.shape[: len(gshape)] != gshape:
        raise ValueError(f"field shape {values.shape} does not start with grid shape {gshape}")
    comp = values.shape[len(gshape) :]
    flat = values.reshape(int(np.prod(gshape)), -1)
    names = list(names) if names is not None else [f"x{k}" for k in range(chart.ndim)]
    header = dict(meta or {})
    header.update(chart=chart.to_dict(), axes=names, component_shape=list(comp))
    ncomp = flat.shape[1]
    cols = [f"i_{a}" for a in names] + names + [f"c{k}" for k in range(ncomp)]
    buf = io.StringIO()
    buf.write("# " + json.dumps(to_plain(header), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    idx = np.indices(gshape).reshape(len(gshape), -1).T
    coords = [chart.axis(k) for k in range(chart.ndim)]
    for r in range(flat.shape[0]):
        ii = idx[r]
        row = [str(int(i)) for i in ii]
        row += [repr(float(coords[k][ii[k]])) for k in range(chart.ndim)]
        row += [repr(float(x)) for x in flat[r]]
        w.writerow(row)
    return buf.getvalue()


def write_grid_csv(path, values, chart, names=None, meta=None):
    return write_atomic(path, grid_csv_text(values, chart, names, meta))


def read_grid_csv(path):
    """Return (values, chart, header); values carry the original grid and component shape."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata line")
        header = json.loads(first[2:])
        rows = list(csv.reader(fh))
    chart = GridChart.from_dict(header["chart"])
    nd = chart.ndim
    body = np.array([[float(x) for x in r[2 * nd :]] for r in rows[1:]], dtype=float)
    idx = np.array([[int(x) for x in r[:nd]] for r in rows[1:]], dtype=int)
    gshape = tuple(chart.counts)
    comp = tuple(header["component_shape"])
    ncomp = int(np.prod(comp)) if comp else 1
    out = np.empty(gshape + (ncomp,))
    out[tuple(idx.T)] = body
    return out.reshape(gshape + comp), chart, header
