"""Binary field snapshots.

Layout (all integers little-endian u32)::

    b"MHD3S" | version | nx | ny | nz | field_count
    field_count x (name_length | name as UTF-8)
    field_count x (nx*ny*nz little-endian float64, x fastest)

Horizontal (limit) snapshots use nz = 1.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MHD3S"
VERSION = 1


class SnapshotError(ValueError):
    pass


def write_snapshot(path, fields: dict[str, np.ndarray]) -> None:
    """Write physical-space fields of identical shape (nx, ny, nz) to ``path``."""
    if not fields:
        raise SnapshotError("no fields to write")
    shapes = {np.shape(v) for v in fields.values()}
    if len(shapes) != 1:
        raise SnapshotError(f"fields have mismatched shapes {sorted(shapes)}")
    (shape,) = shapes
    if len(shape) != 3:
        raise SnapshotError(f"fields must be 3-dimensional arrays, got shape {shape}")
    header = [MAGIC, struct.pack("<5I", VERSION, *shape, len(fields))]
    for name in fields:
        raw = name.encode("utf-8")
        header.append(struct.pack("<I", len(raw)))
        header.append(raw)
    with open(Path(path), "wb") as fh:
        fh.write(b"".join(header))
        for value in fields.values():
            data = np.asarray(value, dtype="<f8")
            fh.write(data.tobytes(order="F"))


def read_snapshot(path) -> tuple[tuple[int, int, int], dict[str, np.ndarray]]:
    """Return ``((nx, ny, nz), {name: array})`` from a snapshot file."""
    buf = Path(path).read_bytes()
    if buf[:5] != MAGIC:
        raise SnapshotError(f"{path}: bad magic {buf[:5]!r}")
    version, nx, ny, nz, count = struct.unpack_from("<5I", buf, 5)
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    pos = 5 + 20
    names = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        names.append(buf[pos:pos + length].decode("utf-8"))
        pos += length
    npts = nx * ny * nz
    expected = pos + 8 * npts * count
    if len(buf) != expected:
        raise SnapshotError(f"{path}: size {len(buf)} does not match header ({expected})")
    fields = {}
    for name in names:
        data = np.frombuffer(buf, dtype="<f8", count=npts, offset=pos)
        fields[name] = data.reshape((nx, ny, nz), order="F").astype(float)
        pos += 8 * npts
    return (nx, ny, nz), fields
