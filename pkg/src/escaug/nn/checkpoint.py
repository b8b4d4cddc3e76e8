"""Binary tensor-map container.

Layout (all integers little-endian):
    magic   4 bytes  b"EGAN"
    version u32      currently 1
    count   u32      number of entries
per entry:
    name_len u16, name bytes (utf-8)
    rank     u8
    dims     u32 * rank
    payload  float32 * prod(dims), little-endian

Round trip is bit-exact for float32 payloads.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EGAN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_tensors(path, tensors: dict[str, np.ndarray]):
    """Write a name->array map.  Arrays are stored as little-endian float32."""
    path = Path(path)
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    # sorted entries make the byte stream independent of caller dict order
    for name in sorted(tensors):
        arr = tensors[name]
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CheckpointError(f"entry name too long: {name!r}")
        a = np.ascontiguousarray(arr, dtype="<f4")
        if a.ndim > 0xFF:
            raise CheckpointError(f"entry rank too large: {name!r}")
        if not np.all(np.isfinite(a)):
            raise CheckpointError(f"non-finite values in entry {name!r}")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    path.write_bytes(b"".join(parts))


def load_tensors(path) -> dict[str, np.ndarray]:
    """Read a container written by save_tensors.  Truncated or malformed
    input raises CheckpointError naming the failing offset."""
    blob = Path(path).read_bytes()
    off = 0

    def need(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"truncated checkpoint: {what} at offset {off}")
        chunk = blob[off:off + n]
        off += n
        return chunk

    if need(4, "magic") != MAGIC:
        raise CheckpointError("bad magic at offset 0")
    version, count = struct.unpack("<II", need(8, "header"))
    if version != VERSION:
        raise CheckpointError(f"unsupported container version {version}")
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<H", need(2, f"entry {i} name length"))
        name = need(name_len, f"entry {i} name").decode("utf-8")
        (rank,) = struct.unpack("<B", need(1, f"entry {i} rank"))
        dims = struct.unpack(f"<{rank}I", need(4 * rank, f"entry {i} dims"))
        n = int(np.prod(dims)) if rank else 1
        payload = need(4 * n, f"entry {i} payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"non-finite values in entry {name!r}")
        out[name] = arr
    if off != len(blob):
        raise CheckpointError(f"{len(blob) - off} trailing bytes after last entry")
    return out
