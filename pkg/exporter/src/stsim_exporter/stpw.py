"""Standalone STPW weight-file reader/writer.

Deliberately independent of the metric engine: this module implements
the documented wire format (magic "STPW", u32 version, u32 entry count;
per entry a u32-length UTF-8 name, u32 rank, u32 dims, raw little-endian
float32 data) so exported files double as a cross-implementation check.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"STPW"
VERSION = 1


def write_stpw(entries: dict[str, np.ndarray], path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(entries)))
        for name, value in entries.items():
            value = np.ascontiguousarray(value, dtype="<f4")
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", value.ndim))
            f.write(struct.pack(f"<{value.ndim}I", *value.shape))
            f.write(value.tobytes())


def read_stpw(path) -> dict[str, np.ndarray]:
    entries: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: not an STPW file")
        version, count = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", f.read(4))
            name = f.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
            n = int(np.prod(dims)) if rank else 1
            data = f.read(4 * n)
            if len(data) != 4 * n:
                raise ValueError(f"{path}: truncated data for entry {name!r}")
            entries[name] = np.frombuffer(data, dtype="<f4").reshape(dims).copy()
    return entries
