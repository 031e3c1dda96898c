"""node2vec over the knowledge graph: biased walks plus skip-gram training.

Walks use the second-order transition weights (1/p back to the previous
node, 1 to a neighbor of the previous node, 1/q otherwise); embeddings are
learned with skip-gram and negative sampling, negatives drawn from the
unigram distribution of walk nodes raised to the 0.75 power.

Each walk has its own seeded stream, so walk sampling is independent of
iteration order; the SGD pass is single-threaded and deterministic.  One
SGD step covers one center occurrence: all its in-window contexts and their
negatives are scored against the pre-update vectors and applied together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .feature_store import FeatureFile
from .knowledge_graph import KnowledgeGraph
from .nn_core import rng_for, sigmoid

NOISE_POWER = 0.75


@dataclass(frozen=True)
class Node2vecConfig:
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    negatives_per_positive: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    lr_floor: float = 1e-4
    dim: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        positive = {
            "p": self.p,
            "q": self.q,
            "walks_per_node": self.walks_per_node,
            "walk_length": self.walk_length,
            "window": self.window,
            "negatives_per_positive": self.negatives_per_positive,
            "learning_rate": self.learning_rate,
            "lr_floor": self.lr_floor,
            "dim": self.dim,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.window > self.walk_length:
            raise ValueError("window must be <= walk_length")


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def to_feature_file(self) -> FeatureFile:
        records = {
            n: v.astype(np.float32).astype(np.float64) for n, v in self.vectors.items()
        }
        return FeatureFile(dim=self.dim, records=records)

    @classmethod
    def from_feature_file(cls, file: FeatureFile) -> "EmbeddingTable":
        return cls(dim=file.dim, vectors=dict(file.records))


def step_distribution(
    graph: KnowledgeGraph, prev: str, cur: str, p: float, q: float
) -> tuple[tuple[str, ...], np.ndarray]:
    """Normalized second-order transition distribution from (prev -> cur)."""
    neighbors = graph.adjacency[cur]
    prev_nbrs = set(graph.adjacency[prev])
    weights = np.array(
        [
            1.0 / p if x == prev else (1.0 if x in prev_nbrs else 1.0 / q)
            for x in neighbors
        ],
        dtype=np.float64,
    )
    return neighbors, weights / weights.sum()


def _neighbor_arrays(graph: KnowledgeGraph) -> list[np.ndarray]:
    idx = graph.node_index
    return [
        np.array([idx[x] for x in graph.adjacency[n]], dtype=np.int64)
        for n in graph.nodes
    ]


def _walk_from(
    start: int,
    nbr: list[np.ndarray],
    config: Node2vecConfig,
    rng: np.random.Generator,
) -> list[int]:
    first = nbr[start]
    if len(first) == 0 or config.walk_length < 2:
        return [start]
    walk = [start, int(first[rng.integers(len(first))])]
    inv_p, inv_q = 1.0 / config.p, 1.0 / config.q
    while len(walk) < config.walk_length:
        cur, prev = walk[-1], walk[-2]
        nbrs = nbr[cur]
        weights = np.full(len(nbrs), inv_q)
        weights[np.isin(nbrs, nbr[prev], assume_unique=True)] = 1.0
        weights[nbrs == prev] = inv_p
        cdf = np.cumsum(weights)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        walk.append(int(nbrs[min(k, len(nbrs) - 1)]))
    return walk


def sample_walks(graph: KnowledgeGraph, config: Node2vecConfig) -> list[list[str]]:
    """walks_per_node biased walks from every node, deterministic in the seed."""
    nbr = _neighbor_arrays(graph)
    walks = []
    for round_idx in range(config.walks_per_node):
        for start in range(len(graph.nodes)):
            rng = rng_for(config.seed, "walk", round_idx, start)
            walk = _walk_from(start, nbr, config, rng)
            walks.append([graph.nodes[i] for i in walk])
    return walks


def _pair_count(length: int, window: int) -> int:
    return sum(min(i + window, length - 1) - max(i - window, 0) for i in range(length))


def train_node2vec(
    walks: list[list[str]], graph: KnowledgeGraph, config: Node2vecConfig
) -> EmbeddingTable:
    """Skip-gram with negative sampling over the walks; returns center vectors.

    Center vectors start uniform in [-0.5/dim, 0.5/dim], context vectors at
    zero; the learning rate decays linearly from ``learning_rate`` to
    ``lr_floor`` over all (center, context) pairs of all epochs.
    """
    n = len(graph.nodes)
    dim = config.dim
    center = rng_for(config.seed, "n2v_init").uniform(-0.5 / dim, 0.5 / dim, (n, dim))
    context = np.zeros((n, dim))

    walks_idx = [np.array([graph.node_index[x] for x in w], dtype=np.int64) for w in walks]
    total_pairs = config.epochs * sum(_pair_count(len(w), config.window) for w in walks_idx)
    if total_pairs > 0:
        counts = np.zeros(n, dtype=np.float64)
        for w in walks_idx:
            np.add.at(counts, w, 1.0)
        noise_cdf = np.cumsum(counts**NOISE_POWER)
        noise_total = noise_cdf[-1]

        rng = rng_for(config.seed, "sgns")
        lr0, floor = config.learning_rate, config.lr_floor
        k = config.negatives_per_positive
        window = config.window
        processed = 0
        for _ in range(config.epochs):
            for walk in walks_idx:
                length = len(walk)
                if length < 2:
                    continue
                for i in range(length):
                    lo, hi = max(0, i - window), min(length - 1, i + window)
                    m = hi - lo
                    if m == 0:
                        continue
                    ctx = np.concatenate([walk[lo:i], walk[i + 1 : hi + 1]])
                    lr = max(floor, lr0 + (floor - lr0) * (processed / total_pairs))
                    negs = np.minimum(
                        np.searchsorted(
                            noise_cdf, rng.random(m * k) * noise_total, side="right"
                        ),
                        n - 1,
                    )
                    targets = np.concatenate([ctx, negs])
                    labels = np.zeros(len(targets))
                    labels[:m] = 1.0
                    c = walk[i]
                    u = center[c]
                    t_vecs = context[targets]  # copy: pre-update values
                    g = (labels - sigmoid(t_vecs @ u)) * lr
                    np.add.at(context, targets, g[:, None] * u[None, :])
                    center[c] = u + t_vecs.T @ g
                    processed += m

    if not np.all(np.isfinite(center)):
        raise ValueError("non-finite embedding values after training")
    return EmbeddingTable(
        dim=dim, vectors={node: center[i].copy() for i, node in enumerate(graph.nodes)}
    )
