"""Joint vectors p and q, the f/g projection heads, and margin training.

p = v_vis (+) v_ctx on the image side and q = v_lang (+) v_att on the text
side; both are mapped into the shared 128-d space by an affine layer, tanh,
and l2 normalization.  Training minimizes the cosine margin loss averaged
over each batch's matching pairs plus its non-matching pairs (all in-batch
cross pairs by default, or k sampled per match), with Adam; a supplied
ContextNet is read-only throughout.

Ablation modes: "vis_lang" (p = v_vis, q = v_lang), "att" and
"att_contextnet" (both append v_att and v_ctx; they differ only in how the
supplied classifier was trained).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attributes import AttributeEncoder
from .checkpoint import read_checkpoint, require_tensor, require_text, write_checkpoint
from .contextnet import ContextNetModel, encode_context
from .corpus import Corpus, Painting
from .errors import ConfigError, DataError, NumericError
from .feature_store import FeatureFile
from .nn_core import (
    EPS_NORM,
    SparseRows,
    SparseVector,
    adam_init,
    adam_step,
    concat_sparse,
    rng_for,
    sparse_dense_matvec,
)
from .text_encoder import Vocabulary, encode_language, tfidf_encode

MODES = ("vis_lang", "att", "att_contextnet")


@dataclass(frozen=True)
class Encoders:
    title_vocab: Vocabulary
    comment_vocab: Vocabulary
    attribute_encoder: AttributeEncoder


@dataclass
class ProjectionModel:
    mode: str
    w_f: np.ndarray  # (out_dim, dim_p)
    b_f: np.ndarray
    w_g: np.ndarray  # (out_dim, dim_q)
    b_g: np.ndarray
    margin: float = 0.1

    @property
    def dim_p(self) -> int:
        return self.w_f.shape[1]

    @property
    def dim_q(self) -> int:
        return self.w_g.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w_f.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w_f, self.b_f, self.w_g, self.b_g]


@dataclass(frozen=True)
class ProjectionConfig:
    mode: str = "att_contextnet"
    batch: int = 32
    lr: float = 1e-4
    epochs: int = 50
    margin: float = 0.1
    seed: int = 0
    select_best: bool = True
    out_dim: int = 128
    negatives: int = 0  # 0 = all in-batch cross pairs, k > 0 = k sampled per match

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.batch < 2:
            raise ConfigError("batch must be >= 2 (no negatives otherwise)")
        if self.epochs < 0 or self.lr <= 0:
            raise ConfigError("epochs must be >= 0 and lr > 0")
        if self.negatives < 0:
            raise ConfigError("negatives must be >= 0")


class PairEncoder:
    """Builds the joint p (dense) and q (sparse) vectors for one mode."""

    def __init__(
        self,
        encoders: Encoders,
        features: FeatureFile,
        mode: str,
        contextnet: ContextNetModel | None = None,
        ctx_features: FeatureFile | None = None,
    ):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        if mode != "vis_lang" and contextnet is None:
            raise ConfigError(f"mode {mode!r} requires a trained ContextNet")
        self.encoders = encoders
        self.features = features
        self.mode = mode
        self.contextnet = contextnet
        self.ctx_features = ctx_features if ctx_features is not None else features
        self._with_attributes = mode != "vis_lang"
        c = encoders.attribute_encoder.c if self._with_attributes else 0
        self.dim_p = features.dim + (contextnet.c if self._with_attributes else 0)
        self.dim_q = len(encoders.title_vocab) + len(encoders.comment_vocab) + c

    def encode_image(self, painting: Painting) -> np.ndarray:
        v_vis = self.features.records.get(painting.id)
        if v_vis is None:
            raise DataError(f"no feature record for painting {painting.id!r}")
        if not self._with_attributes:
            return v_vis
        ctx_in = self.ctx_features.records.get(painting.id)
        if ctx_in is None:
            raise DataError(f"no ContextNet feature record for painting {painting.id!r}")
        return np.concatenate([v_vis, encode_context(self.contextnet, ctx_in)])

    def encode_text(self, painting: Painting) -> SparseVector:
        v_lang = encode_language(
            painting, self.encoders.title_vocab, self.encoders.comment_vocab
        ).v_lang
        if not self._with_attributes:
            return v_lang
        enc = self.encoders.attribute_encoder
        return concat_sparse(v_lang, enc.encode_value_sparse(enc.value_of(painting)))

    def encode_free_text(self, text: str, attribute_value: str | None = None) -> SparseVector:
        v_tit = tfidf_encode(text, self.encoders.title_vocab)
        v_com = tfidf_encode(text, self.encoders.comment_vocab)
        v_lang = concat_sparse(v_tit, v_com)
        if not self._with_attributes:
            return v_lang
        enc = self.encoders.attribute_encoder
        return concat_sparse(v_lang, enc.encode_value_sparse(attribute_value))


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_out, fan_in))


def init_projection(
    mode: str, dim_p: int, dim_q: int, margin: float, seed: int, out_dim: int = 128
) -> ProjectionModel:
    rng = rng_for(seed, "proj_init")
    return ProjectionModel(
        mode=mode,
        w_f=_glorot(rng, out_dim, dim_p),
        b_f=np.zeros(out_dim),
        w_g=_glorot(rng, out_dim, dim_q),
        b_g=np.zeros(out_dim),
        margin=margin,
    )


def _normalize_rows(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(y, axis=1)
    return y / np.maximum(n, EPS_NORM)[:, None], n


def project_f(model: ProjectionModel, p: np.ndarray) -> np.ndarray:
    if p.shape != (model.dim_p,):
        raise ValueError(f"expected dim {model.dim_p}, got {p.shape}")
    y = np.tanh(model.w_f @ p + model.b_f)
    return y / max(float(np.linalg.norm(y)), EPS_NORM)


def project_g(model: ProjectionModel, q: SparseVector | np.ndarray) -> np.ndarray:
    if isinstance(q, SparseVector):
        pre = sparse_dense_matvec(model.w_g, q)
    else:
        if q.shape != (model.dim_q,):
            raise ValueError(f"expected dim {model.dim_q}, got {q.shape}")
        pre = model.w_g @ q
    y = np.tanh(pre + model.b_g)
    return y / max(float(np.linalg.norm(y)), EPS_NORM)


def similarity(model: ProjectionModel, p: np.ndarray, q: SparseVector | np.ndarray) -> float:
    return float(project_f(model, p) @ project_g(model, q))


def cosine_margin_loss(
    model: ProjectionModel,
    p: np.ndarray,
    q: SparseVector | np.ndarray,
    is_match: bool,
) -> float:
    s = similarity(model, p, q)
    if is_match:
        return 1.0 - s
    return max(0.0, s - model.margin)


def _backprop_normalize(
    d_xn: np.ndarray, n: np.ndarray, xn: np.ndarray
) -> np.ndarray:
    # through xn = y / max(||y||, eps); the eps branch is linear in y
    out = np.empty_like(d_xn)
    big = n > EPS_NORM
    if np.any(big):
        dot = np.sum(d_xn[big] * xn[big], axis=1, keepdims=True)
        out[big] = (d_xn[big] - dot * xn[big]) / n[big, None]
    if np.any(~big):
        out[~big] = d_xn[~big] / EPS_NORM
    return out


def batch_loss_and_grads(
    model: ProjectionModel,
    p_mat: np.ndarray,
    q_rows: SparseRows,
    neg_counts: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Mean cosine-margin loss over the batch's pairs, with gradients.

    The diagonal pairs are the matches.  With ``neg_counts`` None, every
    off-diagonal pair is a non-match (B^2 pairs total); otherwise
    ``neg_counts[i, j]`` is the sampled multiplicity of non-matching pair
    (i, j) and the mean runs over B + sum(neg_counts) pairs.
    """
    b = p_mat.shape[0]
    if q_rows.n != b:
        raise ValueError("p/q batch size mismatch")
    y_f = np.tanh(p_mat @ model.w_f.T + model.b_f)
    x_f, n_f = _normalize_rows(y_f)
    y_g = np.tanh(q_rows.matmul_t(model.w_g) + model.b_g)
    x_g, n_g = _normalize_rows(y_g)

    if neg_counts is None:
        neg_counts = np.ones((b, b)) - np.eye(b)
    n_pairs = b + neg_counts.sum()

    s = x_f @ x_g.T  # s[i, j] = sim(f(p_i), g(q_j))
    hinge = np.maximum(0.0, s - model.margin) * neg_counts
    np.fill_diagonal(hinge, 0.0)
    loss = (np.sum(1.0 - np.diag(s)) + np.sum(hinge)) / n_pairs

    g = (s > model.margin) * neg_counts
    np.fill_diagonal(g, -1.0)
    g /= n_pairs

    d_xf = g @ x_g
    d_xg = g.T @ x_f
    d_uf = _backprop_normalize(d_xf, n_f, x_f) * (1.0 - y_f**2)
    d_ug = _backprop_normalize(d_xg, n_g, x_g) * (1.0 - y_g**2)
    grads = [
        d_uf.T @ p_mat,
        d_uf.sum(axis=0),
        q_rows.accumulate_outer(d_ug),
        d_ug.sum(axis=0),
    ]
    return float(loss), grads


@dataclass(frozen=True)
class ProjEpoch:
    epoch: int
    train_loss: float
    val_r1_t2i: float
    val_r1_i2t: float


def _sample_negative_counts(
    rng: np.random.Generator, batch: int, k: int
) -> np.ndarray:
    """Multiplicity matrix for k non-matching pairs per match, zero diagonal."""
    counts = np.zeros((batch, batch))
    take = min(k, batch - 1)
    for i in range(batch):
        others = rng.choice(batch - 1, size=take, replace=False)
        counts[i, np.where(others >= i, others + 1, others)] += 1.0
    return counts


def _rank_one_rate(scores: np.ndarray) -> float:
    """Fraction of rows whose diagonal entry ranks first.

    Rank counts strictly greater scores plus equal scores at earlier
    candidate indices (same tie rule as the retrieval metrics).
    """
    n = scores.shape[0]
    hits = 0
    for i in range(n):
        true = scores[i, i]
        if np.sum(scores[i] > true) == 0 and np.sum(scores[i, :i] == true) == 0:
            hits += 1
    return hits / n


def _project_all(
    model: ProjectionModel, p_mat: np.ndarray, q_rows: SparseRows
) -> tuple[np.ndarray, np.ndarray]:
    x_f, _ = _normalize_rows(np.tanh(p_mat @ model.w_f.T + model.b_f))
    x_g, _ = _normalize_rows(np.tanh(q_rows.matmul_t(model.w_g) + model.b_g))
    return x_f, x_g


def encode_split(
    encoder: PairEncoder, paintings: list[Painting]
) -> tuple[np.ndarray, SparseRows]:
    p_mat = np.stack([encoder.encode_image(p) for p in paintings])
    q_rows = SparseRows([encoder.encode_text(p) for p in paintings])
    return p_mat, q_rows


def train_projection(
    corpus: Corpus,
    encoders: Encoders,
    features: FeatureFile,
    contextnet_model: ContextNetModel | None,
    config: ProjectionConfig,
    ctx_features: FeatureFile | None = None,
) -> tuple[ProjectionModel, list[ProjEpoch]]:
    """Train the f/g heads on all train pairs; the ContextNet stays frozen.

    Emits one trace row per epoch with the train loss and validation R@1 in
    both directions (NaN when the val split is empty).  With select_best,
    the returned weights are the epoch with the best mean validation R@1.
    """
    pair_encoder = PairEncoder(
        encoders, features, config.mode, contextnet_model, ctx_features
    )
    train = corpus.split("train")
    if not train:
        raise DataError("empty train split")
    p_train, q_train = encode_split(pair_encoder, train)
    val = corpus.split("val")
    has_val = len(val) > 0
    if has_val:
        p_val, q_val = encode_split(pair_encoder, val)

    model = init_projection(
        config.mode,
        pair_encoder.dim_p,
        pair_encoder.dim_q,
        config.margin,
        config.seed,
        config.out_dim,
    )
    params = model.params()
    state = adam_init(params, lr=config.lr)
    shuffle = rng_for(config.seed, "proj_shuffle")
    neg_rng = rng_for(config.seed, "proj_negatives") if config.negatives else None
    n = len(train)

    trace: list[ProjEpoch] = []
    best_r1 = -1.0
    best_params: list[np.ndarray] | None = None
    for epoch in range(config.epochs):
        perm = shuffle.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch):
            chunk = perm[start : start + config.batch]
            if len(chunk) < 2:
                continue
            counts = None
            if neg_rng is not None:
                counts = _sample_negative_counts(neg_rng, len(chunk), config.negatives)
            loss, grads = batch_loss_and_grads(
                model, p_train[chunk], q_train.take(chunk), counts
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            adam_step(state, params, grads)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        if has_val:
            x_f, x_g = _project_all(model, p_val, q_val)
            r1_t2i = _rank_one_rate(x_g @ x_f.T)
            r1_i2t = _rank_one_rate(x_f @ x_g.T)
            mean_r1 = 0.5 * (r1_t2i + r1_i2t)
            if config.select_best and mean_r1 > best_r1:
                best_r1 = mean_r1
                best_params = [q.copy() for q in params]
        else:
            r1_t2i = r1_i2t = float("nan")
        trace.append(ProjEpoch(epoch, train_loss, r1_t2i, r1_i2t))

    if best_params is not None:
        for param, best in zip(params, best_params):
            param[...] = best
    return model, trace


def save_model(model: ProjectionModel, path: str | Path) -> None:
    write_checkpoint(
        path,
        {
            "mode": model.mode,
            "margin": np.array(model.margin),
            "w_f": model.w_f,
            "b_f": model.b_f,
            "w_g": model.w_g,
            "b_g": model.b_g,
        },
    )


def load_model(path: str | Path) -> ProjectionModel:
    blocks = read_checkpoint(path)
    return ProjectionModel(
        mode=require_text(blocks, "mode", path),
        w_f=require_tensor(blocks, "w_f", path),
        b_f=require_tensor(blocks, "b_f", path),
        w_g=require_tensor(blocks, "w_g", path),
        b_g=require_tensor(blocks, "b_g", path),
        margin=float(require_tensor(blocks, "margin", path)),
    )


def write_trace(trace: list[ProjEpoch], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_r1_t2i", "val_r1_i2t"])
        for row in trace:
            writer.writerow(
                [row.epoch, repr(row.train_loss), repr(row.val_r1_t2i), repr(row.val_r1_i2t)]
            )
