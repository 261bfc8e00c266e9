"""On-disk formats: RFC-4180 CSV series and PDIF binary field snapshots.

PDIF layout (all little-endian)::

    b"PDIF" | version: u32 | ndim: u32 | shape: ndim x u64 | data: float64, row-major

Each snapshot ``name.pdif`` is paired with a ``name.pdif.hdr`` text sidecar of
``key = value`` lines.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PDIF"
VERSION = 1


def format_float(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(c) if isinstance(c, (float, np.floating)) else c for c in row])
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_snapshot(path, array, header: dict | None = None) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(array, dtype="<f8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, data.ndim))
        fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        fh.write(data.tobytes(order="C"))
    meta = {"format": "PDIF", "version": VERSION, "dtype": "float64-le", "shape": "x".join(map(str, data.shape))}
    meta.update(header or {})
    with Path(str(path) + ".hdr").open("w", encoding="utf-8", newline="\n") as fh:
        for k, v in meta.items():
            fh.write(f"{k} = {format_float(v) if isinstance(v, (float, np.floating)) else v}\n")
    return path


def read_snapshot(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a PDIF file")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported PDIF version {version}")
    shape = struct.unpack_from(f"<{ndim}Q", raw, 12)
    offset = 12 + 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    if len(raw) != offset + 8 * count:
        raise ValueError(f"{path}: truncated or oversized payload")
    return np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)


def read_header(path) -> dict:
    out = {}
    for line in Path(str(path) + ".hdr").read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
