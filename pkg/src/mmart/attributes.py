"""One-hot encoding of a painting attribute over its train-split label set."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import ATTRIBUTES, Corpus, Painting, attribute_labels
from .nn_core import SparseVector

_FIELD_BY_ATTRIBUTE = {
    "type": "art_type",
    "school": "school",
    "timeframe": "timeframe",
    "author": "author",
}


@dataclass(frozen=True)
class AttributeEncoder:
    """Maps one attribute's values to one-hot vectors of dimension ``c``.

    Labels unseen in the train split encode to the all-zeros vector, so
    ``c`` stays exactly the train-split cardinality.
    """

    attribute: str
    labels: tuple[str, ...]
    index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if self.attribute not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {self.attribute!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        object.__setattr__(self, "index", {l: i for i, l in enumerate(self.labels)})

    @classmethod
    def from_corpus(cls, corpus: Corpus, attribute: str) -> "AttributeEncoder":
        return cls(attribute, tuple(attribute_labels(corpus, attribute)))

    @property
    def c(self) -> int:
        return len(self.labels)

    def value_of(self, painting: Painting) -> str:
        return getattr(painting, _FIELD_BY_ATTRIBUTE[self.attribute])

    def encode_value(self, value: str) -> np.ndarray:
        out = np.zeros(self.c, dtype=np.float64)
        pos = self.index.get(value)
        if pos is not None:
            out[pos] = 1.0
        return out

    def encode(self, painting: Painting) -> np.ndarray:
        return self.encode_value(self.value_of(painting))

    def encode_value_sparse(self, value: str | None) -> SparseVector:
        pos = self.index.get(value) if value is not None else None
        if pos is None:
            return SparseVector.zeros(self.c)
        return SparseVector(self.c, np.array([pos]), np.array([1.0]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.labels) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, attribute: str) -> "AttributeEncoder":
        labels = tuple(Path(path).read_text(encoding="utf-8").splitlines())
        return cls(attribute, labels)
