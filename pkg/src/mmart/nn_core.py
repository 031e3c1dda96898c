"""Shared numeric kernel: seeded RNG streams, sparse vectors, Adam, grad checking.

All floating point is 64-bit internally.  Every stochastic operation in the
package draws from a stream returned by :func:`rng_for`, so a whole pipeline
run is reproducible from a single seed.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

EPS_NORM = 1e-12


def rng_for(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return the RNG stream for one purpose.

    Streams are derived from the single run seed via
    ``SeedSequence(seed, spawn_key=(crc32(purpose), *indices))``; distinct
    purposes (and index tuples) get non-colliding, individually
    reproducible streams.
    """
    key = (zlib.crc32(purpose.encode("utf-8")), *indices)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# ---------------------------------------------------------------------------
# sparse vectors


@dataclass(frozen=True)
class SparseVector:
    """Fixed-dimension vector storing only its nonzero entries.

    ``indices`` are strictly increasing int64 positions < ``dim`` and
    ``values`` are the matching finite nonzero float64 entries.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.dim < 0:
            raise ValueError("dim must be non-negative")
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices) > 0:
            if self.indices[-1] >= self.dim or self.indices[0] < 0:
                raise ValueError("index out of range")
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError("indices must be strictly increasing")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("values must be finite")
            if np.any(self.values == 0.0):
                raise ValueError("explicit zero entries are not stored")

    @classmethod
    def from_entries(cls, dim: int, indices, values) -> "SparseVector":
        """Build a vector, dropping explicit zeros and sorting by index."""
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        order = np.argsort(idx, kind="stable")
        return cls(dim, idx[order], val[order])

    @classmethod
    def zeros(cls, dim: int) -> "SparseVector":
        return cls(dim, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def scale(self, factor: float) -> "SparseVector":
        return SparseVector.from_entries(self.dim, self.indices, self.values * factor)


def concat_sparse(a: SparseVector, b: SparseVector) -> SparseVector:
    """Concatenate: entries of ``b`` are shifted by ``a.dim``."""
    return SparseVector(
        a.dim + b.dim,
        np.concatenate([a.indices, b.indices + a.dim]),
        np.concatenate([a.values, b.values]),
    )


def sparse_dense_matvec(w: np.ndarray, x: SparseVector) -> np.ndarray:
    """``w @ x`` touching only the columns of ``w`` where ``x`` is nonzero."""
    if w.shape[1] != x.dim:
        raise ValueError(f"shape mismatch: {w.shape} @ dim-{x.dim} vector")
    if x.nnz == 0:
        return np.zeros(w.shape[0], dtype=np.float64)
    return w[:, x.indices] @ x.values


class SparseRows:
    """A batch of SparseVectors sharing one dimension (CSR-like layout)."""

    def __init__(self, rows: Sequence[SparseVector]):
        if not rows:
            raise ValueError("empty batch")
        dim = rows[0].dim
        if any(r.dim != dim for r in rows):
            raise ValueError("rows must share one dimension")
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([r.nnz for r in rows])
        self._init_arrays(
            dim,
            len(rows),
            indptr,
            np.concatenate([r.indices for r in rows]),
            np.concatenate([r.values for r in rows]),
        )

    def _init_arrays(self, dim, n, indptr, indices, values) -> None:
        self.dim = dim
        self.n = n
        self.indptr = indptr
        self.indices = indices
        self.values = values
        # row id of every stored entry, for batched scatter-accumulation
        self.rowids = np.repeat(np.arange(self.n), np.diff(self.indptr))

    def row(self, i: int) -> SparseVector:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVector(self.dim, self.indices[lo:hi], self.values[lo:hi])

    def take(self, rows: np.ndarray) -> "SparseRows":
        """Sub-batch with the given rows, in the given order."""
        out = object.__new__(SparseRows)
        counts = (self.indptr[1:] - self.indptr[:-1])[rows]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(counts)
        flat = np.concatenate(
            [np.arange(self.indptr[r], self.indptr[r + 1]) for r in rows]
        ) if len(rows) else np.empty(0, dtype=np.int64)
        out._init_arrays(
            self.dim, len(rows), indptr, self.indices[flat], self.values[flat]
        )
        return out

    def matmul_t(self, w: np.ndarray) -> np.ndarray:
        """Rows @ w.T for a (k, dim) weight matrix; returns (n, k)."""
        out = np.zeros((self.n, w.shape[0]), dtype=np.float64)
        for r in range(self.n):
            lo, hi = self.indptr[r], self.indptr[r + 1]
            if hi > lo:
                out[r] = w[:, self.indices[lo:hi]] @ self.values[lo:hi]
        return out

    def accumulate_outer(self, d: np.ndarray) -> np.ndarray:
        """Sum of outer(d[r], row_r) over rows, as a (k, dim) gradient.

        Only columns with nonzero input are touched; duplicate columns
        across rows accumulate exactly (np.add.at), in row-major entry
        order, matching an ordered dense accumulation.
        """
        grad_t = np.zeros((self.dim, d.shape[1]), dtype=np.float64)
        if len(self.indices):
            np.add.at(grad_t, self.indices, d[self.rowids] * self.values[:, None])
        return grad_t.T


# ---------------------------------------------------------------------------
# activations and losses


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (last axis)."""
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def smooth_l1(x: np.ndarray) -> np.ndarray:
    """Huber with beta=1: 0.5*x^2 if |x| < 1 else |x| - 0.5, elementwise."""
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def l2_normalize(v: np.ndarray, eps: float = EPS_NORM) -> np.ndarray:
    return v / max(float(np.linalg.norm(v)), eps)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Bias-corrected Adam with the canonical constants."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params: Sequence[np.ndarray], lr: float, **kwargs) -> AdamState:
    state = AdamState(lr=lr, **kwargs)
    state.m = [np.zeros_like(p) for p in params]
    state.v = [np.zeros_like(p) for p in params]
    return state


def adam_step(
    state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> Sequence[np.ndarray]:
    """One in-place Adam update; returns ``params``.

    A non-finite gradient is reported and the whole step is skipped
    (parameters, moments and step counter all unchanged).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch: param {p.shape} vs grad {g.shape}")
    if any(not np.all(np.isfinite(g)) for g in grads):
        log.warning("non-finite gradient at t=%d; step skipped", state.t)
        return params
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def grad_check(
    loss_fn: Callable[[Sequence[np.ndarray]], tuple[float, Sequence[np.ndarray]]],
    params: Sequence[np.ndarray],
    h: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(params)`` must return ``(loss, grads)`` and be pure; the
    relative error per coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    _, grads = loss_fn(params)
    max_rel = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g).reshape(-1)
        for k in range(flat_p.size):
            orig = flat_p[k]
            flat_p[k] = orig + h
            lp = loss_fn(params)[0]
            flat_p[k] = orig - h
            lm = loss_fn(params)[0]
            flat_p[k] = orig
            numeric = (lp - lm) / (2.0 * h)
            analytic = flat_g[k]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel
