"""Self-describing binary container for named float64 tensors.

Layout: magic ``SGLK``, format version (u16), tensor count (u32), then one
record per tensor: name length (u16), UTF-8 name, rank (u8), dims (u32
each), row-major float64 payload. All integers and floats little-endian.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ContainerError

MAGIC = b"SGLK"
VERSION = 1


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name, arr in tensors.items():
        # note: ascontiguousarray would promote rank-0 tensors to rank 1
        arr = np.asarray(arr, dtype=np.float64, order="C")
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise ContainerError(f"tensor name too long: {name[:32]}...")
        if arr.ndim > 0xFF:
            raise ContainerError(f"rank {arr.ndim} not supported")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def load_tensors(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:4]!r}")
    version, count = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    tensors: dict[str, np.ndarray] = {}
    off = 10
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", raw, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", raw, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
            off += 8 * n
            tensors[name] = data.reshape(dims).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise ContainerError(f"{path}: truncated or corrupt container") from exc
    if off != len(raw):
        raise ContainerError(f"{path}: {len(raw) - off} trailing bytes")
    return tensors
