"""Single-file checkpoint container.

Layout: an 8-byte magic, a format version, a JSON manifest (run config,
schedule parameters, ansatz, seed), then named tensors as little-endian
float64 with explicit shape headers. Tensor bytes round-trip bit-exactly.

    magic "QCDIFFCK" | u32 version | u32 manifest_len | manifest JSON
    u32 tensor_count | per tensor: u16 name_len | name | u8 ndim |
    u32 dims[ndim] | f64-LE data
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"QCDIFFCK"
VERSION = 1


def save_checkpoint(path, manifest: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(manifest_bytes))
    blob += manifest_bytes
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8", order="C")  # ascontiguousarray would promote 0-d to 1-d
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
        blob += arr.tobytes()
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path
        self.context = "header"

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise CheckpointError(
                f"{self.path}: truncated while reading {self.context} at byte {self.pos}")
        out = self.blob[self.pos:self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: bad checkpoint magic")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    r.context = "manifest"
    (mlen,) = r.unpack("<I")
    try:
        manifest = json.loads(r.take(mlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable manifest: {exc}") from exc

    r.context = "tensor table"
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for i in range(count):
        r.context = f"tensor {i} name"
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8", errors="replace")
        r.context = f"tensor {name!r} shape"
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        r.context = f"tensor {name!r} data"
        data = np.frombuffer(r.take(size * 8), dtype="<f8").reshape(shape)
        tensors[name] = data.astype(np.float64)
    if r.pos != len(r.blob):
        raise CheckpointError(f"{path}: {len(r.blob) - r.pos} trailing bytes after last tensor")
    return manifest, tensors
