"""Minimal MMAF writer/reader.

Independent implementation of the published byte format so this tool stays
decoupled from the retrieval package:

    magic "MMAF" | u32 version=1 | u32 record_count | u32 dim
    per record: u32 id byte-length | UTF-8 id | dim * little-endian f32
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MMAF"
VERSION = 1


def write_mmaf(path: str | Path, dim: int, records: dict[str, np.ndarray]) -> None:
    parts = [MAGIC, struct.pack("<III", VERSION, len(records), dim)]
    for rid, vec in records.items():
        if vec.shape != (dim,):
            raise ValueError(f"record {rid!r}: expected dim {dim}, got {vec.shape}")
        rid_bytes = rid.encode("utf-8")
        parts.append(struct.pack("<I", len(rid_bytes)))
        parts.append(rid_bytes)
        parts.append(np.asarray(vec, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_mmaf(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise ValueError(f"{path}: not an MMAF file")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    records: dict[str, np.ndarray] = {}
    offset = 16
    for _ in range(count):
        (rid_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        rid = data[offset : offset + rid_len].decode("utf-8")
        offset += rid_len
        records[rid] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes")
    return dim, records
