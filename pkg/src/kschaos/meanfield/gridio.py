"""Density snapshots (``KSGRID1``) and the JSON manifest listing them.

Each file, little-endian: magic b"KSGRID1\\0", u64 nx, u64 ny, f64 h,
f64 origin_x, f64 origin_y, f64 time, then nx*ny f64 values in row-major
order of the (nx, ny) array (x index slowest).
"""

import json
import os
import struct

import numpy as np

from ..errors import FileFormatError
from .grid import DensityGrid, GridSpec

MAGIC = b"KSGRID1\x00"
_HEAD = struct.Struct("<8sQQdddd")
MANIFEST = "frames.json"


def write_grid(path, f: DensityGrid):
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, g.nx, g.ny, g.h, g.origin[0], g.origin[1], f.time))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_grid(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read(_HEAD.size)
            if len(raw) < _HEAD.size:
                raise FileFormatError(f"{path}: truncated header")
            magic, nx, ny, h, ox, oy, t = _HEAD.unpack(raw)
            if magic != MAGIC:
                raise FileFormatError(f"{path}: not a KSGRID1 file")
            data = fh.read()
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if len(data) != 8 * nx * ny:
        raise FileFormatError(f"{path}: expected {nx * ny} values, found {len(data) // 8}")
    values = np.frombuffer(data, dtype="<f8").reshape(nx, ny)
    try:
        return DensityGrid(GridSpec(nx, ny, h, (ox, oy)), values.copy(), t)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_frames(directory, frames, prefix="frame"):
    """Write every frame plus ``frames.json``; returns the list of written paths."""
    os.makedirs(directory, exist_ok=True)
    entries, paths = [], []
    for k, f in enumerate(frames):
        name = f"{prefix}_{k:05d}.ksgrid"
        write_grid(os.path.join(directory, name), f)
        entries.append({"file": name, "time": f.time})
        paths.append(os.path.join(directory, name))
    manifest = os.path.join(directory, MANIFEST)
    with open(manifest, "w") as fh:
        json.dump({"format": "KSGRID1", "frames": entries}, fh, indent=1)
        fh.write("\n")
    paths.append(manifest)
    return paths


def read_frames(directory):
    with open(os.path.join(directory, MANIFEST)) as fh:
        manifest = json.load(fh)
    return [read_grid(os.path.join(directory, e["file"])) for e in manifest["frames"]]
