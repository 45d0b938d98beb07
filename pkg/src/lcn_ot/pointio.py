"""Reading and writing point sets.

Text format: a header line ``n d`` followed by ``n`` rows of ``d`` floats.
Lines starting with ``#`` are comments. The binary variant starts with the
magic ``LCNPTS1``, then little-endian u64 ``n`` and ``d``, then ``n*d``
little-endian f64 values in row-major order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import PointSet

MAGIC = b"LCNPTS1"


def write_text(path, ps: PointSet) -> None:
    pts = ps.points
    with open(path, "w") as f:
        if ps.id:
            f.write(f"# {ps.id}\n")
        f.write(f"{pts.shape[0]} {pts.shape[1]}\n")
        for row in pts:
            f.write(" ".join(repr(float(v)) for v in row))
            f.write("\n")


def read_text(path) -> PointSet:
    rows = []
    header = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if header is None:
                if len(fields) != 2:
                    raise ValueError(f"{path}:{lineno}: expected header 'n d'")
                header = (int(fields[0]), int(fields[1]))
                continue
            if len(fields) != header[1]:
                raise ValueError(f"{path}:{lineno}: expected {header[1]} values, got {len(fields)}")
            rows.append([float(v) for v in fields])
    if header is None:
        raise ValueError(f"{path}: missing header")
    if len(rows) != header[0]:
        raise ValueError(f"{path}: header declares {header[0]} points, found {len(rows)}")
    return PointSet(np.array(rows, dtype=np.float64).reshape(header), id=Path(path).stem)


def write_binary(path, ps: PointSet) -> None:
    n, d = ps.points.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<QQ", n, d))
        f.write(np.ascontiguousarray(ps.points, dtype="<f8").tobytes())


def read_binary(path) -> PointSet:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: bad magic")
    off = len(MAGIC)
    n, d = struct.unpack_from("<QQ", data, off)
    off += 16
    expected = off + 8 * n * d
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")
    pts = np.frombuffer(data, dtype="<f8", offset=off).reshape(n, d)
    return PointSet(pts, id=Path(path).stem)


def read_points(path) -> PointSet:
    with open(path, "rb") as f:
        head = f.read(len(MAGIC))
    return read_binary(path) if head == MAGIC else read_text(path)


def write_points(path, ps: PointSet, binary: bool = False) -> None:
    (write_binary if binary else write_text)(path, ps)
