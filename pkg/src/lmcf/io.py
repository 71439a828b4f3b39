"""Text serialisation of curves, patches and reports.

All floats are written with 17 significant digits so that a file can be
read back bit-for-bit.  Files are UTF-8 with LF line endings; JSON keys are
sorted so that equal inputs give byte-identical output.
"""

import json
import math
from pathlib import Path

import numpy as np

from lmcf.curves import PlanarCurve
from lmcf.surface import SurfacePatch

CURVE_HEADER = "# planar-curve v1"
PATCH_HEADER = "# surface-patch v1"


def fmt(x):
    """Fixed 17-significant-digit float format."""
    return f"{float(x):.17g}"


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- curves ---------------------------------------------------------------------------


def curves_to_csv(curves):
    """CSV text for one curve or a list of components (blank line between components)."""
    if isinstance(curves, PlanarCurve):
        curves = [curves]
    blocks = []
    for c in curves:
        rows = [f"{fmt(x)},{fmt(y)}" for x, y in c.points]
        blocks.append("\n".join(rows))
    return CURVE_HEADER + "\nx,y\n" + "\n\n".join(blocks) + "\n"


def write_curves(path, curves):
    _write_text(path, curves_to_csv(curves))


def read_curves(path, closed=False):
    """Read a planar-curve CSV; returns a list of :class:`PlanarCurve` components."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if not lines or lines[0].strip() != CURVE_HEADER:
        raise ValueError(f"{path}: missing '{CURVE_HEADER}' header")
    if lines[1].strip() != "x,y":
        raise ValueError(f"{path}: expected column line 'x,y'")
    comps, cur = [], []
    for line in lines[2:]:
        if line.strip():
            cur.append([float(t) for t in line.split(",")])
        elif cur:
            comps.append(cur)
            cur = []
    if cur:
        comps.append(cur)
    return [PlanarCurve(np.array(c), closed=closed) for c in comps]


# -- patches -------------------------------------------------------------------------


def patch_to_csv(p, fields=None):
    """CSV text for a patch, one row per node (``u`` slowest), plus named scalar fields."""
    fields = dict(fields or {})
    names = list(fields)
    U, V = np.meshgrid(p.u, p.v, indexing="ij")
    cols = [U.ravel(), V.ravel()] + [p.positions[..., k].ravel() for k in range(4)]
    cols += [np.broadcast_to(np.asarray(fields[n], float), p.shape).ravel() for n in names]
    header = ",".join(["u", "v", "x1", "y1", "x2", "y2"] + names)
    rows = [",".join(fmt(x) for x in row) for row in zip(*cols)]
    return PATCH_HEADER + "\n" + header + "\n" + "\n".join(rows) + "\n"


def write_patch(path, p, fields=None):
    _write_text(path, patch_to_csv(p, fields))


def read_patch(path):
    """Read a surface-patch CSV; returns ``(patch, fields)``."""
    with open(path, encoding="utf-8") as fh:
        if fh.readline().strip() != PATCH_HEADER:
            raise ValueError(f"{path}: missing '{PATCH_HEADER}' header")
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    u = np.unique(data[:, 0])
    v = np.unique(data[:, 1])
    nu, nv = len(u), len(v)
    if nu * nv != len(data):
        raise ValueError(f"{path}: rows do not form a lattice")
    grid = data.reshape(nu, nv, -1)
    hu = (u[-1] - u[0]) / max(nu - 1, 1)
    hv = (v[-1] - v[0]) / max(nv - 1, 1)
    patch = SurfacePatch(grid[..., 2:6], hu, hv, u0=u[0], v0=v[0])
    fields = {n: grid[..., 6 + k] for k, n in enumerate(names[6:])}
    return patch, fields


# -- tables and reports ---------------------------------------------------------------


def table_to_csv(columns):
    """CSV text from an ordered mapping ``name -> sequence`` of equal lengths."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    rows = []
    for row in zip(*data):
        rows.append(",".join(fmt(x) if np.issubdtype(type(x), np.number) else str(x) for x in row))
    return ",".join(names) + "\n" + "".join(r + "\n" for r in rows)


def write_table(path, columns):
    _write_text(path, table_to_csv(columns))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, obj):
    _write_text(path, dumps(obj))


def write_text(path, text):
    _write_text(path, text if text.endswith("\n") else text + "\n")
