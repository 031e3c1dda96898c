"""Painting metadata: TSV loading, split management, attribute label lists.

The on-disk layout is one delimited UTF-8 table per split with a header row
naming at least the nine known columns.  Loading is strict about structure
(header, field counts, duplicate ids) but tolerant about content: empty
attribute cells become the ``UNKNOWN`` sentinel, which is a legitimate label.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

SPLITS = ("train", "val", "test")
ATTRIBUTES = ("type", "school", "timeframe", "author")
UNKNOWN = "UNKNOWN"

# canonical header name -> Painting field
_COLUMNS = {
    "IMAGE_FILE": "id",
    "DESCRIPTION": "comment",
    "AUTHOR": "author",
    "TITLE": "title",
    "TECHNIQUE": "technique",
    "DATE": "date",
    "TYPE": "art_type",
    "SCHOOL": "school",
    "TIMEFRAME": "timeframe",
}
_HEADER_ORDER = (
    "IMAGE_FILE",
    "DESCRIPTION",
    "AUTHOR",
    "TITLE",
    "TECHNIQUE",
    "DATE",
    "TYPE",
    "SCHOOL",
    "TIMEFRAME",
)
_FIELD_BY_ATTRIBUTE = {
    "type": "art_type",
    "school": "school",
    "timeframe": "timeframe",
    "author": "author",
}
_IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".gif", ".bmp", ".tif", ".tiff", ".webp")


@dataclass(frozen=True)
class Painting:
    """One artwork record; ``id`` is the image filename stem."""

    id: str
    title: str
    comment: str
    author: str
    technique: str
    date: str
    art_type: str
    school: str
    timeframe: str
    split: str


@dataclass(frozen=True)
class RowDiagnostic:
    """A rejected input row; ``row`` is the 1-based line number in its file."""

    split: str
    row: int
    reason: str

    def __str__(self) -> str:
        return f"ROW {self.row}: {self.reason}"


class Corpus:
    """An immutable collection of paintings partitioned into splits.

    Paintings are stored grouped by split in train/val/test order; the
    order within each split is preserved.
    """

    def __init__(self, paintings: Iterable[Painting]):
        given = list(paintings)
        for p in given:
            if p.split not in SPLITS:
                raise ValueError(f"invalid split {p.split!r} for painting {p.id!r}")
        self.paintings: tuple[Painting, ...] = tuple(
            p for s in SPLITS for p in given if p.split == s
        )
        self.split_index: dict[str, list[str]] = {s: [] for s in SPLITS}
        self._by_id: dict[str, Painting] = {}
        for p in self.paintings:
            if p.id in self._by_id:
                raise ValueError(f"duplicate painting id {p.id!r}")
            for attr in ("author", "technique", "art_type", "school", "timeframe"):
                if getattr(p, attr) == "":
                    raise ValueError(f"empty {attr} for painting {p.id!r}")
            self._by_id[p.id] = p
            self.split_index[p.split].append(p.id)

    def __len__(self) -> int:
        return len(self.paintings)

    def __getitem__(self, painting_id: str) -> Painting:
        return self._by_id[painting_id]

    def __contains__(self, painting_id: str) -> bool:
        return painting_id in self._by_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.paintings == other.paintings

    def split(self, name: str) -> list[Painting]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [self._by_id[i] for i in self.split_index[name]]


def _strip_image_extension(name: str) -> str:
    lower = name.lower()
    for ext in _IMAGE_EXTENSIONS:
        if lower.endswith(ext):
            return name[: -len(ext)]
    return name


def _read_lines(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line[:-1] if line.endswith("\r") else line for line in lines]


def load_corpus(
    paths: Mapping[str, str | Path], delimiter: str = "\t"
) -> tuple[Corpus, list[RowDiagnostic]]:
    """Load one metadata file per split.

    Rows with a wrong field count or an empty image file cell are rejected
    and reported as diagnostics; structural problems (unreadable file,
    missing header column, duplicate id) raise :class:`DataError`.
    """
    unknown = set(paths) - set(SPLITS)
    if unknown:
        raise DataError(f"unknown splits in paths: {sorted(unknown)}")
    paintings: list[Painting] = []
    diagnostics: list[RowDiagnostic] = []
    seen: dict[str, str] = {}
    for split in SPLITS:
        if split not in paths:
            continue
        path = Path(paths[split])
        try:
            lines = _read_lines(path)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        if not lines:
            raise DataError(f"{path}: empty file (no header row)")
        header = [h.strip().upper() for h in lines[0].split(delimiter)]
        positions: dict[str, int] = {}
        for col in _HEADER_ORDER:
            if col not in header:
                raise DataError(f"{path}: header missing mandatory column {col}")
            positions[col] = header.index(col)
        for lineno, line in enumerate(lines[1:], start=2):
            if line == "":
                continue
            cells = line.split(delimiter)
            if len(cells) != len(header):
                diagnostics.append(
                    RowDiagnostic(
                        split,
                        lineno,
                        f"expected {len(header)} fields, got {len(cells)}",
                    )
                )
                continue
            raw = {field: cells[positions[col]] for col, field in _COLUMNS.items()}
            pid = _strip_image_extension(raw["id"])
            if pid == "":
                diagnostics.append(RowDiagnostic(split, lineno, "empty image file"))
                continue
            if pid in seen:
                raise DataError(
                    f"duplicate id {pid!r} ({seen[pid]} and {split}, line {lineno})"
                )
            seen[pid] = split
            for attr in ("author", "technique", "date", "art_type", "school", "timeframe"):
                if raw[attr] == "":
                    raw[attr] = UNKNOWN
            paintings.append(
                Painting(
                    id=pid,
                    title=raw["title"],
                    comment=raw["comment"],
                    author=raw["author"],
                    technique=raw["technique"],
                    date=raw["date"],
                    art_type=raw["art_type"],
                    school=raw["school"],
                    timeframe=raw["timeframe"],
                    split=split,
                )
            )
    return Corpus(paintings), diagnostics


def save_corpus(
    corpus: Corpus, paths: Mapping[str, str | Path], delimiter: str = "\t"
) -> None:
    """Write one delimited file per split; inverse of :func:`load_corpus`."""
    field_of = {col: _COLUMNS[col] for col in _HEADER_ORDER}
    for split in SPLITS:
        if split not in paths:
            if corpus.split_index[split]:
                raise DataError(f"no output path for non-empty split {split!r}")
            continue
        lines = [delimiter.join(_HEADER_ORDER)]
        for p in corpus.split(split):
            cells = [getattr(p, field_of[col]) for col in _HEADER_ORDER]
            for cell in cells:
                if delimiter in cell or "\n" in cell or "\r" in cell:
                    raise DataError(
                        f"field of painting {p.id!r} contains the delimiter or a newline"
                    )
            lines.append(delimiter.join(cells))
        Path(paths[split]).write_text("\n".join(lines) + "\n", encoding="utf-8")


def attribute_labels(corpus: Corpus, attribute: str) -> list[str]:
    """Sorted distinct values of ``attribute`` over the train split only."""
    if attribute not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attribute!r}")
    if len(corpus) == 0:
        raise DataError("empty corpus")
    field = _FIELD_BY_ATTRIBUTE[attribute]
    return sorted({getattr(p, field) for p in corpus.split("train")})
