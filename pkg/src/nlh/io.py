"""Deterministic file outputs: CSV series, JSON reports, binary frame container.

CSV floats are written with repr-level precision (%.17g) in fixed column
order, so identical runs produce byte-identical files.  The frame container
is little-endian: magic b"NLHF", then u32 version, u32 N, u32 n_points,
f64 box_radius, f64 dt, u32 frame count, f64 frame times, then the raw f64
frames in row-major order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction

_MAGIC = b"NLHF"
_VERSION = 1


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.atleast_1d(np.asarray(columns[k])) for k in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("CSV columns must share a length")
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(fmt(a[i]) for a in arrays))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0]:
        raise ValueError(f"empty CSV: {path}")
    names = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise ValueError(f"CSV has a header but no rows: {path}")
    cols = {k: np.array([float(r[j]) for r in rows]) for j, k in enumerate(names)}
    return cols


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def config_hash(config_bytes: bytes) -> str:
    return hashlib.sha256(config_bytes).hexdigest()


def write_frames(path, frames: list[GridFunction], dt: float) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = frames[0].grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, g.ndim, g.n_points))
        fh.write(struct.pack("<ddI", g.box_radius, dt, len(frames)))
        np.array([f.time for f in frames], dtype="<f8").tofile(fh)
        for f in frames:
            np.ascontiguousarray(f.values, dtype="<f8").tofile(fh)
    return path


def read_frames(path) -> tuple[list[GridFunction], float]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"not a frame container: {path}")
        version, ndim, n_points = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        box_radius, dt, count = struct.unpack("<ddI", fh.read(20))
        times = np.fromfile(fh, dtype="<f8", count=count)
        grid = Grid(ndim, box_radius, n_points)
        frames = []
        for i in range(count):
            vals = np.fromfile(fh, dtype="<f8", count=n_points**ndim)
            frames.append(GridFunction(grid, vals.reshape(grid.shape), time=float(times[i])))
    return frames, dt
