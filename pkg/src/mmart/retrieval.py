"""Retrieval evaluation: cosine ranking, R@K and median rank, ten-choice task.

The rank of a query's ground truth is 1 plus the number of candidates with a
strictly greater score, ties broken in favor of earlier candidate indices.
The median rank is the lower median, so it is always an attained rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Painting
from .errors import DataError
from .nn_core import SparseRows, rng_for
from .projection import (
    PairEncoder,
    ProjectionModel,
    _normalize_rows,
    encode_split,
    project_f,
    project_g,
)

TEXT_TO_IMAGE = "text_to_image"
IMAGE_TO_TEXT = "image_to_text"
RECALL_KS = (1, 5, 10)

# scores the query painting's text against candidate paintings' images
Scorer = Callable[[Painting, Sequence[Painting]], np.ndarray]


@dataclass
class ScoreMatrix:
    direction: str
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        if self.scores.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError("score matrix shape does not match id lists")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("non-finite scores")


@dataclass(frozen=True)
class RetrievalReport:
    direction: str
    r_at: dict[int, float]
    median_rank: int

    def to_json_dict(self) -> dict:
        return {
            "direction": self.direction,
            "r1": self.r_at[1],
            "r5": self.r_at[5],
            "r10": self.r_at[10],
            "mr": self.median_rank,
        }


def score_all(
    model: ProjectionModel,
    encoder: PairEncoder,
    queries: list[Painting],
    candidates: list[Painting],
    direction: str = TEXT_TO_IMAGE,
) -> ScoreMatrix:
    """Cosine similarities of every query against every candidate.

    In text_to_image the query side is g(q) and the candidate side f(p);
    image_to_text swaps the roles.
    """
    def text_side(paintings: list[Painting]) -> np.ndarray:
        rows = SparseRows([encoder.encode_text(p) for p in paintings])
        return _normalize_rows(np.tanh(rows.matmul_t(model.w_g) + model.b_g))[0]

    def image_side(paintings: list[Painting]) -> np.ndarray:
        p_mat = np.stack([encoder.encode_image(p) for p in paintings])
        return _normalize_rows(np.tanh(p_mat @ model.w_f.T + model.b_f))[0]

    if direction == TEXT_TO_IMAGE:
        x_query, x_cand = text_side(queries), image_side(candidates)
    elif direction == IMAGE_TO_TEXT:
        x_query, x_cand = image_side(queries), text_side(candidates)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return ScoreMatrix(
        direction=direction,
        row_ids=tuple(p.id for p in queries),
        col_ids=tuple(p.id for p in candidates),
        scores=x_query @ x_cand.T,
    )


def ranks_for(scores: np.ndarray, gt_cols: np.ndarray) -> np.ndarray:
    """1-based rank of scores[i, gt_cols[i]] within row i under the tie rule."""
    n = scores.shape[0]
    ranks = np.empty(n, dtype=np.int64)
    for i in range(n):
        true = scores[i, gt_cols[i]]
        greater = int(np.sum(scores[i] > true))
        ties_before = int(np.sum(scores[i, : gt_cols[i]] == true))
        ranks[i] = 1 + greater + ties_before
    return ranks


def compute_metrics(
    matrix: ScoreMatrix, ground_truth: Mapping[str, str]
) -> RetrievalReport:
    """R@1/5/10 and lower-median rank for one direction."""
    col_index = {cid: j for j, cid in enumerate(matrix.col_ids)}
    gt_cols = np.empty(len(matrix.row_ids), dtype=np.int64)
    for i, rid in enumerate(matrix.row_ids):
        target = ground_truth.get(rid)
        if target is None or target not in col_index:
            raise DataError(f"ground truth for query {rid!r} missing from candidates")
        gt_cols[i] = col_index[target]
    ranks = ranks_for(matrix.scores, gt_cols)
    n = len(ranks)
    r_at = {k: int(np.sum(ranks <= k)) / n for k in RECALL_KS}
    median_rank = int(np.sort(ranks)[int(np.ceil(n / 2)) - 1])
    return RetrievalReport(matrix.direction, r_at, median_rank)


def evaluate_both_directions(
    model: ProjectionModel, encoder: PairEncoder, paintings: list[Painting]
) -> list[RetrievalReport]:
    """Text->image and image->text reports over one painting list."""
    p_mat, q_rows = encode_split(encoder, paintings)
    x_f, _ = _normalize_rows(np.tanh(p_mat @ model.w_f.T + model.b_f))
    x_g, _ = _normalize_rows(np.tanh(q_rows.matmul_t(model.w_g) + model.b_g))
    ids = tuple(p.id for p in paintings)
    identity = {pid: pid for pid in ids}
    reports = []
    for direction, scores in ((TEXT_TO_IMAGE, x_g @ x_f.T), (IMAGE_TO_TEXT, x_f @ x_g.T)):
        reports.append(
            compute_metrics(ScoreMatrix(direction, ids, ids, scores), identity)
        )
    return reports


def export_scores_tsv(matrix: ScoreMatrix, path) -> None:
    """Dump a score matrix as TSV: header row of candidate ids, one row per query."""
    lines = ["query\t" + "\t".join(matrix.col_ids)]
    for i, rid in enumerate(matrix.row_ids):
        lines.append(rid + "\t" + "\t".join(repr(float(s)) for s in matrix.scores[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def projection_scorer(model: ProjectionModel, encoder: PairEncoder) -> Scorer:
    """Ten-choice scorer: query comment+title against candidate images."""

    def score(query: Painting, candidates: Sequence[Painting]) -> np.ndarray:
        g_vec = project_g(model, encoder.encode_text(query))
        return np.array(
            [float(project_f(model, encoder.encode_image(c)) @ g_vec) for c in candidates]
        )

    return score


def ten_choice_eval(
    scorer: Scorer,
    paintings: list[Painting],
    mode: str = "easy",
    trials: int = 1000,
    seed: int = 0,
) -> float:
    """Pick-the-painting-among-10 accuracy; deterministic in the seed.

    Easy mode samples 9 distractors uniformly; difficult mode samples them
    among paintings sharing the query's type, so only types with at least
    10 members are eligible.
    """
    if mode not in ("easy", "difficult"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "easy":
        if len(paintings) < 10:
            raise DataError("need at least 10 paintings for the ten-choice task")
        eligible = list(range(len(paintings)))
        pools = None
    else:
        by_type: dict[str, list[int]] = {}
        for i, p in enumerate(paintings):
            by_type.setdefault(p.art_type, []).append(i)
        eligible = [i for ids in by_type.values() if len(ids) >= 10 for i in ids]
        if not eligible:
            raise DataError("difficult mode needs a type with >= 10 paintings")
        pools = by_type
    rng = rng_for(seed, "ten_choice")
    correct = 0
    for _ in range(trials):
        qi = eligible[int(rng.integers(len(eligible)))]
        pool = pools[paintings[qi].art_type] if pools is not None else eligible
        others = [i for i in pool if i != qi]
        picks = rng.choice(len(others), size=9, replace=False)
        candidate_ids = [qi] + [others[int(k)] for k in picks]
        order = rng.permutation(10)
        candidates = [paintings[candidate_ids[int(k)]] for k in order]
        true_pos = int(np.argwhere(order == 0)[0, 0])
        scores = scorer(paintings[qi], candidates)
        if int(np.argmax(scores)) == true_pos:
            correct += 1
    return correct / trials
