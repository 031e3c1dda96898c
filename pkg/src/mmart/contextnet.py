"""ContextNet head: attribute classifier plus graph-aligned 128-d encoder.

Both heads read the same fixed visual feature vector.  The classifier is
softmax(relu(W_cls v + b_cls)); the encoder is the affine map
W_enc v + b_enc.  Training jointly minimizes

    lambda_c * cross_entropy + lambda_e * mean-smooth-L1(code - graph_embedding)

summed over train samples (batch means are used for the Adam steps).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attributes import AttributeEncoder
from .checkpoint import read_checkpoint, require_tensor, require_text, write_checkpoint
from .corpus import Corpus
from .errors import ConfigError, DataError, NumericError
from .feature_store import FeatureFile
from .knowledge_graph import painting_node
from .nn_core import (
    adam_init,
    adam_step,
    relu,
    rng_for,
    smooth_l1,
    smooth_l1_grad,
    softmax,
)
from .node2vec import EmbeddingTable

LOG_CLAMP = 1e-12


@dataclass
class ContextNetModel:
    attribute: str
    labels: tuple[str, ...]
    w_cls: np.ndarray  # (c, d)
    b_cls: np.ndarray  # (c,)
    w_enc: np.ndarray  # (code_dim, d)
    b_enc: np.ndarray  # (code_dim,)
    lambda_c: float = 1.0
    lambda_e: float = 1.0

    @property
    def input_dim(self) -> int:
        return self.w_cls.shape[1]

    @property
    def c(self) -> int:
        return self.w_cls.shape[0]

    @property
    def code_dim(self) -> int:
        return self.w_enc.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w_cls, self.b_cls, self.w_enc, self.b_enc]


@dataclass(frozen=True)
class ContextNetConfig:
    lambda_c: float = 1.0
    lambda_e: float = 1.0
    epochs: int = 50
    batch: int = 32
    lr: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class EpochLoss:
    epoch: int
    loss_c: float
    loss_e: float
    total: float


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_out, fan_in))


def init_model(
    attribute: str,
    labels: tuple[str, ...],
    input_dim: int,
    code_dim: int,
    seed: int,
    lambda_c: float = 1.0,
    lambda_e: float = 1.0,
) -> ContextNetModel:
    rng = rng_for(seed, "ctx_init")
    c = len(labels)
    return ContextNetModel(
        attribute=attribute,
        labels=tuple(labels),
        w_cls=_glorot(rng, c, input_dim),
        # positive bias keeps every ReLU unit initially active; a unit whose
        # pre-activation is clipped gets no gradient and cannot recover
        b_cls=np.ones(c),
        w_enc=_glorot(rng, code_dim, input_dim),
        b_enc=np.zeros(code_dim),
        lambda_c=lambda_c,
        lambda_e=lambda_e,
    )


def contextnet_forward(
    model: ContextNetModel, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return (class probabilities, 128-d code) for one feature vector."""
    if v.shape != (model.input_dim,):
        raise ValueError(f"expected dim {model.input_dim}, got {v.shape}")
    probs = softmax(relu(model.w_cls @ v + model.b_cls))
    code = model.w_enc @ v + model.b_enc
    return probs, code


def joint_loss(
    probs: np.ndarray,
    true_label: int,
    code: np.ndarray,
    graph_embedding: np.ndarray,
    lambda_c: float,
    lambda_e: float,
) -> float:
    """lambda_c * cross-entropy + lambda_e * mean smooth-L1 over code dims.

    probs[true_label] is clamped to 1e-12 before the log to guard
    ReLU-induced exact zeros.
    """
    if code.shape != graph_embedding.shape:
        raise ValueError("code/embedding dimension mismatch")
    lc = -np.log(max(float(probs[true_label]), LOG_CLAMP))
    le = float(np.mean(smooth_l1(code - graph_embedding)))
    return lambda_c * lc + lambda_e * le


def _batch_forward(model: ContextNetModel, x: np.ndarray):
    z = x @ model.w_cls.T + model.b_cls
    probs = softmax(relu(z))
    code = x @ model.w_enc.T + model.b_enc
    return z, probs, code


def batch_loss_and_grads(
    model: ContextNetModel,
    x: np.ndarray,
    y: np.ndarray,
    emb: np.ndarray,
) -> tuple[float, float, float, list[np.ndarray]]:
    """Mean joint loss over a batch and gradients for all four parameters."""
    b = x.shape[0]
    z, probs, code = _batch_forward(model, x)
    rows = np.arange(b)
    lc = float(np.mean(-np.log(np.maximum(probs[rows, y], LOG_CLAMP))))
    diff = code - emb
    le = float(np.mean(smooth_l1(diff)))

    d_act = probs.copy()
    d_act[rows, y] -= 1.0
    d_z = d_act * (z > 0) * (model.lambda_c / b)
    d_code = smooth_l1_grad(diff) * (model.lambda_e / (b * code.shape[1]))
    grads = [d_z.T @ x, d_z.sum(axis=0), d_code.T @ x, d_code.sum(axis=0)]
    total = model.lambda_c * lc + model.lambda_e * le
    return lc, le, total, grads


def train_contextnet(
    corpus: Corpus,
    features: FeatureFile,
    graph_embeddings: EmbeddingTable | None,
    config: ContextNetConfig,
    attribute: str = "author",
) -> tuple[ContextNetModel, list[EpochLoss]]:
    """Train classifier and encoder on the train split; deterministic in seed.

    ``graph_embeddings`` may be omitted only when lambda_e == 0 (plain
    classifier); the encoder then regresses to zero targets with weight 0.
    """
    if graph_embeddings is None:
        if config.lambda_e != 0.0:
            raise ConfigError("graph embeddings required when lambda_e != 0")
        code_dim = 128
    else:
        code_dim = graph_embeddings.dim
    encoder = AttributeEncoder.from_corpus(corpus, attribute)
    train = corpus.split("train")
    missing = [p.id for p in train if p.id not in features.records]
    if missing:
        raise DataError(f"missing features for train paintings: {missing[:5]}...")
    x = np.stack([features.records[p.id] for p in train])
    y = np.array([encoder.index[encoder.value_of(p)] for p in train])
    if graph_embeddings is None:
        emb = np.zeros((len(train), code_dim))
    else:
        missing = [
            p.id for p in train if painting_node(p.id) not in graph_embeddings.vectors
        ]
        if missing:
            raise DataError(f"missing graph embeddings for train paintings: {missing[:5]}...")
        emb = np.stack([graph_embeddings.vectors[painting_node(p.id)] for p in train])

    model = init_model(
        attribute,
        tuple(encoder.labels),
        input_dim=features.dim,
        code_dim=code_dim,
        seed=config.seed,
        lambda_c=config.lambda_c,
        lambda_e=config.lambda_e,
    )
    params = model.params()
    state = adam_init(params, lr=config.lr)
    shuffle = rng_for(config.seed, "ctx_shuffle")
    n = len(train)
    trace: list[EpochLoss] = []
    for epoch in range(config.epochs):
        perm = shuffle.permutation(n)
        for start in range(0, n, config.batch):
            chunk = perm[start : start + config.batch]
            _, _, total, grads = batch_loss_and_grads(model, x[chunk], y[chunk], emb[chunk])
            if not np.isfinite(total):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            adam_step(state, params, grads)
        lc, le, total, _ = batch_loss_and_grads(model, x, y, emb)
        trace.append(EpochLoss(epoch, lc, le, total))
    return model, trace


def encode_context(model: ContextNetModel, v: np.ndarray) -> np.ndarray:
    """v_ctx: the classifier's softmax probability vector."""
    probs, _ = contextnet_forward(model, v)
    return probs


def predict_label(model: ContextNetModel, v: np.ndarray) -> str:
    return model.labels[int(np.argmax(encode_context(model, v)))]


def train_accuracy(model: ContextNetModel, x: np.ndarray, y: np.ndarray) -> float:
    _, probs, _ = _batch_forward(model, x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def save_model(model: ContextNetModel, path: str | Path) -> None:
    write_checkpoint(
        path,
        {
            "attribute": model.attribute,
            "labels": "\n".join(model.labels),
            "w_cls": model.w_cls,
            "b_cls": model.b_cls,
            "w_enc": model.w_enc,
            "b_enc": model.b_enc,
            "lambda_c": np.array(model.lambda_c),
            "lambda_e": np.array(model.lambda_e),
        },
    )


def load_model(path: str | Path) -> ContextNetModel:
    blocks = read_checkpoint(path)
    return ContextNetModel(
        attribute=require_text(blocks, "attribute", path),
        labels=tuple(require_text(blocks, "labels", path).split("\n")),
        w_cls=require_tensor(blocks, "w_cls", path),
        b_cls=require_tensor(blocks, "b_cls", path),
        w_enc=require_tensor(blocks, "w_enc", path),
        b_enc=require_tensor(blocks, "b_enc", path),
        lambda_c=float(require_tensor(blocks, "lambda_c", path)),
        lambda_e=float(require_tensor(blocks, "lambda_e", path)),
    )


def write_trace(trace: list[EpochLoss], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss_c", "loss_e", "total"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.loss_c), repr(row.loss_e), repr(row.total)])
