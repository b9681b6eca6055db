"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"USEA" | u32 version=1 | u64 entry count
    per entry, sorted by name:
        u32 name length | UTF-8 name | u8 dtype (0 = float32) | u8 rank
        | u64 extent * rank | float32 little-endian payload
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import (
    BadMagicError,
    CheckpointError,
    TruncatedCheckpointError,
    UnsupportedFormatError,
    UnsupportedVersionError,
)
from .nn import ParameterStore

MAGIC = b"USEA"
VERSION = 1
DTYPE_F32 = 0


def encode_entry(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    arr = np.asarray(arr)
    if arr.ndim > 255:
        raise CheckpointError(f"{name}: rank {arr.ndim} too large")
    head = struct.pack("<I", len(raw)) + raw + struct.pack("<BB", DTYPE_F32, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def dumps(store: dict[str, np.ndarray]) -> bytes:
    names = list(store)
    if any(not n for n in names):
        raise CheckpointError("tensor names must be non-empty")
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(names))]
    parts += [encode_entry(n, store[n]) for n in sorted(names)]
    return b"".join(parts)


def save_checkpoint(store: dict[str, np.ndarray], path) -> None:
    data = dumps(store)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(f"file ends inside {what} (offset {self.pos})")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads(data: bytes) -> ParameterStore:
    r = _Reader(data)
    if len(data) < 4:
        raise TruncatedCheckpointError("file shorter than the magic number")
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    (count,) = r.unpack("<Q", "entry count")
    store = ParameterStore()
    for _ in range(count):
        (nlen,) = r.unpack("<I", "name length")
        name = r.take(nlen, "name").decode("utf-8")
        dtype, rank = r.unpack("<BB", f"header of {name!r}")
        if dtype != DTYPE_F32:
            raise UnsupportedFormatError(f"{name}: unknown dtype code {dtype}")
        shape = r.unpack(f"<{rank}Q", f"extents of {name!r}")
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = r.take(4 * size, f"payload of {name!r}")
        if name in store:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        store[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after last entry")
    return store


def load_checkpoint(path) -> ParameterStore:
    with open(path, "rb") as fh:
        return loads(fh.read())
