"""Title/comment vocabularies and the concatenated tf-idf language vector.

Tokens are maximal runs of Unicode letters after lowercasing.  The tf-idf
variant is raw term count times smoothed idf, ``ln((1+N)/(1+df)) + 1``,
followed by l2 normalization; a text with no in-vocabulary token encodes to
the zero vector.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Painting
from .errors import DataError
from .nn_core import SparseVector, concat_sparse

COUNT_MODES = ("total", "documents")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal alphabetic runs, order preserved.

    "Alphabetic" is str.isalpha (Unicode letter categories); every other
    character is a delimiter.
    """
    return "".join(
        ch if ch.isalpha() else " " for ch in text.lower()
    ).split()


@dataclass(frozen=True)
class Vocabulary:
    """Term list with train-split document frequencies.

    ``terms`` are unique, lowercase, purely alphabetic, in lexicographic
    order; ``index`` maps each term to its position.
    """

    terms: tuple[str, ...]
    index: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self, term: str) -> float:
        return math.log((1.0 + self.n_docs) / (1.0 + self.doc_freq[term])) + 1.0

    def save(self, path: str | Path) -> None:
        lines = [f"#n_docs={self.n_docs}"]
        lines += [f"{t}\t{self.doc_freq[t]}" for t in self.terms]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("#n_docs="):
            raise DataError(f"{path}: missing #n_docs header")
        n_docs = int(lines[0].removeprefix("#n_docs="))
        terms: list[str] = []
        doc_freq: dict[str, int] = {}
        for line in lines[1:]:
            if not line:
                continue
            term, _, df = line.partition("\t")
            terms.append(term)
            doc_freq[term] = int(df)
        return cls(tuple(terms), {t: i for i, t in enumerate(terms)}, doc_freq, n_docs)


def _build_vocab(documents: list[str], min_count: int, count_mode: str) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if count_mode not in COUNT_MODES:
        raise ValueError(f"count_mode must be one of {COUNT_MODES}")
    total: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for doc in documents:
        tokens = tokenize(doc)
        total.update(tokens)
        doc_freq.update(set(tokens))
    counts = total if count_mode == "total" else doc_freq
    terms = tuple(sorted(t for t in counts if counts[t] >= min_count))
    return Vocabulary(
        terms=terms,
        index={t: i for i, t in enumerate(terms)},
        doc_freq={t: doc_freq[t] for t in terms},
        n_docs=len(documents),
    )


def build_title_vocab(corpus: Corpus) -> Vocabulary:
    """All distinct title tokens over the train split, no frequency threshold."""
    train = corpus.split("train")
    if not train:
        raise DataError("empty train split")
    return _build_vocab([p.title for p in train], min_count=1, count_mode="total")


def build_comment_vocab(
    corpus: Corpus, min_count: int = 10, count_mode: str = "total"
) -> Vocabulary:
    """Comment tokens occurring at least ``min_count`` times over train comments.

    ``count_mode`` selects whether occurrences are counted in total or as
    the number of documents containing the token.
    """
    train = corpus.split("train")
    if not train:
        raise DataError("empty train split")
    return _build_vocab([p.comment for p in train], min_count, count_mode)


def tfidf_encode(text: str, vocab: Vocabulary) -> SparseVector:
    """Encode ``text`` as an l2-normalized tf-idf vector over ``vocab``.

    Out-of-vocabulary tokens are dropped; an all-OOV text yields the zero
    vector (normalization skipped).
    """
    counts = Counter(t for t in tokenize(text) if t in vocab.index)
    if not counts:
        return SparseVector.zeros(len(vocab))
    indices = np.array(sorted(vocab.index[t] for t in counts), dtype=np.int64)
    values = np.array(
        [counts[vocab.terms[i]] * vocab.idf(vocab.terms[i]) for i in indices],
        dtype=np.float64,
    )
    values /= np.sqrt(np.sum(values**2))
    return SparseVector(len(vocab), indices, values)


@dataclass(frozen=True)
class LanguageVector:
    """tf-idf encodings of one painting's title and comment, plus their concat."""

    v_tit: SparseVector
    v_com: SparseVector
    v_lang: SparseVector


def encode_language(
    painting: Painting, title_vocab: Vocabulary, comment_vocab: Vocabulary
) -> LanguageVector:
    v_tit = tfidf_encode(painting.title, title_vocab)
    v_com = tfidf_encode(painting.comment, comment_vocab)
    return LanguageVector(v_tit, v_com, concat_sparse(v_tit, v_com))
