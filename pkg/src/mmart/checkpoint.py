"""The MMCK named-block checkpoint format shared by trained models.

Layout (little-endian):

    magic "MMCK" | u32 version=1 | u32 block_count
    per block: u32 name_len | name bytes | u8 kind
        kind 1 (tensor): u32 ndim | u32 * ndim shape | f64 data
        kind 2 (text):   u32 byte_len | UTF-8 bytes

Blocks are written sorted by name, so files are byte-stable for equal
contents.  Tensors are stored at full f64 precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"MMCK"
VERSION = 1
_KIND_TENSOR = 1
_KIND_TEXT = 2


def write_checkpoint(path: str | Path, blocks: dict[str, np.ndarray | str]) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(blocks))]
    for name in sorted(blocks):
        value = blocks[name]
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        if isinstance(value, str):
            payload = value.encode("utf-8")
            parts.append(struct.pack("<BI", _KIND_TEXT, len(payload)))
            parts.append(payload)
        else:
            arr = np.asarray(value, dtype=np.float64)
            parts.append(struct.pack("<BI", _KIND_TENSOR, arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray | str]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise DataError(f"{path}: not an MMCK checkpoint")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    blocks: dict[str, np.ndarray | str] = {}
    offset = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset : offset + name_len].decode("utf-8")
            offset += name_len
            kind, first = struct.unpack_from("<BI", data, offset)
            offset += 5
            if kind == _KIND_TEXT:
                blocks[name] = data[offset : offset + first].decode("utf-8")
                offset += first
            elif kind == _KIND_TENSOR:
                shape = struct.unpack_from(f"<{first}I", data, offset)
                offset += 4 * first
                size = int(np.prod(shape)) if first else 1
                arr = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
                offset += 8 * size
                blocks[name] = arr.reshape(shape).astype(np.float64)
            else:
                raise DataError(f"{path}: unknown block kind {kind}")
    except (struct.error, ValueError) as exc:
        raise DataError(f"{path}: truncated checkpoint") from exc
    if offset != len(data):
        raise DataError(f"{path}: trailing bytes")
    return blocks


def require_tensor(blocks: dict, name: str, path: str | Path) -> np.ndarray:
    value = blocks.get(name)
    if not isinstance(value, np.ndarray):
        raise DataError(f"{path}: missing tensor block {name!r}")
    return value


def require_text(blocks: dict, name: str, path: str | Path) -> str:
    value = blocks.get(name)
    if not isinstance(value, str):
        raise DataError(f"{path}: missing text block {name!r}")
    return value
