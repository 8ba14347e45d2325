"""Named tensor store and the STPW binary weight-file format.

File layout (all integers little-endian unsigned 32-bit):

    magic   4 bytes  b"STPW"
    version u32      currently 1
    count   u32      number of entries
    entry*  name_len u32, name UTF-8 bytes,
            rank u32, dims u32 * rank,
            data float32 little-endian, row-major

Round trips are bit-exact: the float32 payload is written and read
without any conversion.
"""

from __future__ import annotations

import struct
from typing import Iterator

import numpy as np

from .errors import FormatError, WeightNotFoundError

MAGIC = b"STPW"
VERSION = 1


class WeightStore:
    """Mapping from entry name to a float32 tensor."""

    def __init__(self, entries: dict[str, np.ndarray] | None = None):
        self._entries: dict[str, np.ndarray] = {}
        if entries:
            for name, value in entries.items():
                self.set(name, value)

    def set(self, name: str, value) -> None:
        if not name:
            raise FormatError("entry name must be nonempty")
        self._entries[name] = np.ascontiguousarray(value, dtype=np.float32)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise WeightNotFoundError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def update(self, other: "WeightStore") -> None:
        for name, value in other.items():
            self.set(name, value)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for (_, a), (_, b) in zip(self.items(), other.items())
        )


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(store)))
        for name, value in store.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", value.ndim))
            f.write(struct.pack(f"<{value.ndim}I", *value.shape))
            f.write(value.astype("<f4", copy=False).tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}")
    return data


def load_weights(path) -> WeightStore:
    store = WeightStore()
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise FormatError("bad magic: not an STPW weight file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise FormatError(f"unsupported format version {version}")
        (count,) = struct.unpack("<I", _read_exact(f, 4, "entry count"))
        for i in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            try:
                name = _read_exact(f, name_len, "name").decode("utf-8")
            except UnicodeDecodeError as e:
                raise FormatError(f"entry {i}: name is not valid UTF-8") from e
            (rank,) = struct.unpack("<I", _read_exact(f, 4, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            n = int(np.prod(dims)) if rank else 1
            raw = _read_exact(f, 4 * n, f"data of {name!r}")
            if name in store:
                raise FormatError(f"duplicate entry name {name!r}")
            store.set(name, np.frombuffer(raw, dtype="<f4").reshape(dims).copy())
    return store
