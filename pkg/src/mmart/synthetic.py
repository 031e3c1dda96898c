"""Synthetic corpora for tests, experiments, and the demo pipeline.

Every painting gets a unique, purely alphabetic "opus" token placed in both
its title and its comment, and the comment names the painting's author,
school, and type in template prose, so text carries both painting identity
and attribute signals.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, Painting
from .nn_core import rng_for

TYPE_POOL = (
    "portrait",
    "landscape",
    "religious",
    "mythological",
    "genre",
    "stilllife",
    "historical",
    "interior",
)
SCHOOL_POOL = (
    "italian",
    "flemish",
    "dutch",
    "french",
    "spanish",
    "german",
    "english",
    "austrian",
)
AUTHOR_POOL = (
    "albrecht",
    "bertrand",
    "caravia",
    "delmonte",
    "estebanez",
    "fiorelli",
    "giacometti",
    "hendrick",
    "isenbrant",
    "jacobsen",
    "kalfmeyer",
    "lorenzetti",
)
TECHNIQUE_POOL = ("oil on canvas", "tempera on panel", "fresco")
FILLER_POOL = (
    "light",
    "shadow",
    "figure",
    "drapery",
    "horizon",
    "gesture",
    "composition",
    "pigment",
    "texture",
    "glaze",
    "symmetry",
    "contour",
)


def _alpha_code(k: int) -> str:
    letters = []
    k += 26 * 26  # at least three letters, no leading-zero ambiguity
    while k:
        k, r = divmod(k, 26)
        letters.append(chr(ord("a") + r))
    return "".join(reversed(letters))


def _name(pool: tuple[str, ...], prefix: str, k: int) -> str:
    return pool[k] if k < len(pool) else prefix + _alpha_code(k)


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int
    n_val: int = 0
    n_test: int = 0
    n_types: int = 4
    n_schools: int = 4
    n_timeframes: int = 4
    n_authors: int = 8
    seed: int = 0


def make_synthetic_corpus(spec: SyntheticSpec) -> Corpus:
    rng = rng_for(spec.seed, "synth_corpus")
    types = [_name(TYPE_POOL, "kind", i) for i in range(spec.n_types)]
    schools = [_name(SCHOOL_POOL, "school", i) for i in range(spec.n_schools)]
    authors = [_name(AUTHOR_POOL, "painter", i) for i in range(spec.n_authors)]
    timeframes = [f"{1401 + 50 * i}-{1450 + 50 * i}" for i in range(spec.n_timeframes)]

    counts = (("train", spec.n_train), ("val", spec.n_val), ("test", spec.n_test))
    paintings = []
    k = 0
    for split, count in counts:
        for _ in range(count):
            opus = "opus" + _alpha_code(k)
            author_idx = int(rng.integers(spec.n_authors))
            type_idx = int(rng.integers(spec.n_types))
            school = schools[author_idx % spec.n_schools]
            timeframe = timeframes[author_idx % spec.n_timeframes]
            fillers = rng.choice(len(FILLER_POOL), size=3, replace=False)
            filler_text = " and ".join(FILLER_POOL[int(i)] for i in fillers)
            paintings.append(
                Painting(
                    id=f"synth{k:05d}",
                    title=f"{types[type_idx]} {opus}",
                    comment=(
                        f"A {types[type_idx]} painted by {authors[author_idx]} of the "
                        f"{school} school. The work {opus} studies {filler_text}."
                    ),
                    author=authors[author_idx],
                    technique=TECHNIQUE_POOL[author_idx % len(TECHNIQUE_POOL)],
                    date=str(1401 + 50 * (author_idx % spec.n_timeframes) + k % 50),
                    art_type=types[type_idx],
                    school=school,
                    timeframe=timeframe,
                    split=split,
                )
            )
            k += 1
    return Corpus(paintings)
