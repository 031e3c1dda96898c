"""The MMAF visual-feature file: binary read/write plus synthetic generation.

Format (all integers little-endian u32, values little-endian f32):

    magic "MMAF" | version=1 | record_count | dim
    per record: id byte-length | UTF-8 id bytes | dim * f32

Vectors are converted to float64 on read; in-memory files produced here keep
values f32-exact so a write/read cycle is a byte-level identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import ATTRIBUTES, Corpus, attribute_labels
from .errors import DataError
from .nn_core import rng_for

MAGIC = b"MMAF"
VERSION = 1

# pseudo-attribute giving every train painting its own basis vector
ID_ATTRIBUTE = "id"


@dataclass
class FeatureFile:
    """All feature vectors of one file, keyed by painting id."""

    dim: int
    records: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = VERSION

    def validate(self) -> None:
        for pid, vec in self.records.items():
            if vec.shape != (self.dim,):
                raise DataError(f"record {pid!r}: expected dim {self.dim}, got {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"record {pid!r}: non-finite value")


def write_features(file: FeatureFile, path: str | Path) -> None:
    file.validate()
    parts = [MAGIC, struct.pack("<III", file.version, len(file.records), file.dim)]
    for pid, vec in file.records.items():
        id_bytes = pid.encode("utf-8")
        parts.append(struct.pack("<I", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(vec.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_features(path: str | Path) -> FeatureFile:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise DataError(f"{path}: truncated header")
    if data[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {data[:4]!r}")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    records: dict[str, np.ndarray] = {}
    offset = 16
    for _ in range(count):
        if offset + 4 > len(data):
            raise DataError(f"{path}: truncated record")
        (id_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + id_len + 4 * dim > len(data):
            raise DataError(f"{path}: truncated record")
        pid = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += 4 * dim
        if pid in records:
            raise DataError(f"{path}: duplicate id {pid!r}")
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{path}: non-finite value in record {pid!r}")
        records[pid] = vec
    if offset != len(data):
        raise DataError(f"{path}: trailing bytes after last record")
    return FeatureFile(dim=dim, records=records, version=version)


def export_tsv(file: FeatureFile, path: str | Path) -> None:
    """Debug dump: one line per record, "id<TAB>v1,v2,..."."""
    lines = [
        pid + "\t" + ",".join(repr(float(x)) for x in vec)
        for pid, vec in file.records.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def missing_ids(corpus: Corpus, file: FeatureFile, splits: Iterable[str]) -> list[str]:
    """Ids of paintings in the given splits without a feature record."""
    out = []
    for split in splits:
        out += [pid for pid in corpus.split_index[split] if pid not in file.records]
    return out


def synthesize_features(
    corpus: Corpus, dim: int, attribute: str, noise_sigma: float, seed: int
) -> FeatureFile:
    """Deterministic test features: basis vector per train label plus noise.

    ``attribute`` may be one of the metadata attributes or ``"id"``, which
    treats every train painting id as its own label (unique basis vector
    per painting).  Paintings whose label was not seen in train get pure
    noise.
    """
    if attribute == ID_ATTRIBUTE:
        labels = sorted(corpus.split_index["train"])
    elif attribute in ATTRIBUTES:
        labels = attribute_labels(corpus, attribute)
    else:
        raise ValueError(f"unknown attribute {attribute!r}")
    if dim < len(labels):
        raise ValueError(f"dim {dim} < {len(labels)} train labels of {attribute!r}")
    index = {l: i for i, l in enumerate(labels)}
    rng = rng_for(seed, "synth_features")
    records: dict[str, np.ndarray] = {}
    for p in corpus.paintings:
        vec = rng.normal(0.0, noise_sigma, dim) if noise_sigma > 0 else np.zeros(dim)
        value = p.id if attribute == ID_ATTRIBUTE else _attribute_value(p, attribute)
        pos = index.get(value)
        if pos is not None:
            vec[pos] += 1.0
        # round-trip exactness: keep in-memory values f32-representable
        records[p.id] = vec.astype(np.float32).astype(np.float64)
    return FeatureFile(dim=dim, records=records)


def _attribute_value(painting, attribute: str) -> str:
    field_name = {"type": "art_type"}.get(attribute, attribute)
    return getattr(painting, field_name)
