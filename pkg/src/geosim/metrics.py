"""Embedding quality metrics: rank preservation and label prediction.

All rank computations are exact and break distance ties by the smaller
index, so results are deterministic and match a brute-force enumeration
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import normalize_rows
from .optim import AdamState, adam_step

__all__ = [
    "LabeledEmbedding",
    "trustworthiness",
    "continuity",
    "knn_accuracy",
    "knn_jaccard",
    "linear_probe",
    "stratified_split",
]


@dataclass
class LabeledEmbedding:
    """Points plus integer labels, one per row."""

    z: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=np.float64)
        y = np.asarray(self.labels)
        if z.ndim != 2:
            raise ValueError(f"expected 2-D points, got shape {z.shape}")
        if y.ndim != 1 or y.shape[0] != z.shape[0]:
            raise ValueError("labels must be one integer per row")
        if not np.issubdtype(y.dtype, np.integer):
            raise ValueError("labels must be integers")
        self.z = z
        self.labels = y.astype(np.int64)

    @property
    def n(self) -> int:
        return self.z.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    sq = np.einsum("ij,ij->i", a, a)[:, None] + np.einsum("ij,ij->i", b, b)[None, :]
    sq -= 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    if b is a:
        sq = np.minimum(sq, sq.T)  # keep ranks symmetric despite BLAS rounding
    return sq


def _neighbor_order(d: np.ndarray, exclude_self: bool) -> np.ndarray:
    """Row-wise ordering by (distance, column index)."""
    n, m = d.shape
    if exclude_self:
        d = d.copy()
        np.fill_diagonal(d, np.inf)
    col = np.broadcast_to(np.arange(m), d.shape)
    order = np.lexsort((col, d), axis=-1)
    return order[:, : m - 1] if exclude_self else order


def _check_k(k: int, n: int) -> None:
    if not 1 <= k < n / 2:
        raise ValueError(f"k must satisfy 1 <= k < n/2 with n={n}, got {k}")


def _maybe_subsample(x, z, max_points, seed):
    n = x.shape[0]
    if n <= max_points:
        return x, z
    idx = np.sort(np.random.default_rng(seed).choice(n, size=max_points, replace=False))
    return x[idx], z[idx]


def trustworthiness(
    x: np.ndarray,
    z: np.ndarray,
    k: int = 10,
    max_points: int = 5000,
    seed: int = 0,
) -> float:
    """Penalizes embedding neighbors that are far in the input space.

    T(k) = 1 - 2 / (n k (2n - 3k - 1)) * sum over points i and over the
    embedding k-NN of i absent from the input k-NN of (input rank - k).
    Identity embeddings score exactly 1. Sets larger than max_points are
    subsampled with the given seed.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.ndim != 2 or z.ndim != 2 or x.shape[0] != z.shape[0]:
        raise ValueError("expected 2-D arrays with matching row counts")
    x, z = _maybe_subsample(x, z, max_points, seed)
    n = x.shape[0]
    _check_k(k, n)

    order_x = _neighbor_order(_sq_dists(x), exclude_self=True)
    order_z = _neighbor_order(_sq_dists(z), exclude_self=True)
    rows = np.arange(n)[:, None]
    ranks_x = np.empty((n, n), dtype=np.int64)
    ranks_x[rows, order_x] = np.arange(1, n)[None, :]
    in_x = np.zeros((n, n), dtype=bool)
    in_x[rows, order_x[:, :k]] = True

    top_z = order_z[:, :k]
    escaped = ~in_x[rows, top_z]
    penalty = int((ranks_x[rows, top_z][escaped] - k).sum())
    return 1.0 - 2.0 * penalty / (n * k * (2.0 * n - 3.0 * k - 1.0))


def continuity(
    x: np.ndarray,
    z: np.ndarray,
    k: int = 10,
    max_points: int = 5000,
    seed: int = 0,
) -> float:
    """Penalizes input neighbors lost by the embedding: trustworthiness swapped."""
    return trustworthiness(z, x, k=k, max_points=max_points, seed=seed)


def knn_accuracy(train: LabeledEmbedding, test: LabeledEmbedding, k: int = 5) -> float:
    """Majority-vote k-NN accuracy; vote ties go to the smallest class."""
    if train.z.shape[1] != test.z.shape[1]:
        raise ValueError("train and test points must share a dimension")
    if not 1 <= k <= train.n:
        raise ValueError(f"k must lie in [1, {train.n}], got {k}")
    if test.n < 1:
        raise ValueError("test set is empty")
    classes, train_y = np.unique(train.labels, return_inverse=True)
    d = _sq_dists(test.z, train.z)
    order = _neighbor_order(d, exclude_self=False)
    votes = train_y[order[:, :k]]
    counts = np.zeros((test.n, classes.size), dtype=np.int64)
    np.add.at(counts, (np.arange(test.n)[:, None], votes), 1)
    pred = classes[counts.argmax(axis=1)]  # argmax resolves ties to the smallest class
    return float((pred == test.labels).mean())


def knn_jaccard(a: np.ndarray, b: np.ndarray, k: int = 10, metric: str = "euclidean") -> float:
    """Mean Jaccard overlap of the k-NN index sets computed in two spaces."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("point sets must share a row count")
    n = a.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    if metric == "euclidean":
        da, db = _sq_dists(a), _sq_dists(b)
    elif metric == "cosine":
        ua, _ = normalize_rows(a)
        ub, _ = normalize_rows(b)
        da, db = 1.0 - ua @ ua.T, 1.0 - ub @ ub.T
        da, db = np.minimum(da, da.T), np.minimum(db, db.T)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    top_a = _neighbor_order(da, exclude_self=True)[:, :k]
    top_b = _neighbor_order(db, exclude_self=True)[:, :k]
    rows = np.arange(n)[:, None]
    member = np.zeros((n, n), dtype=bool)
    member[rows, top_a] = True
    inter = member[rows, top_b].sum(axis=1)
    return float((inter / (2 * k - inter)).mean())


def stratified_split(labels, fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split into (train_idx, test_idx).

    Each class contributes round(fraction * class size) points to train,
    at least one; classes need two or more members.
    """
    y = np.asarray(labels)
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.size < 2:
            raise ValueError(f"class {cls} has fewer than 2 members")
        members = rng.permutation(members)
        take = min(max(1, round(fraction * members.size)), members.size - 1)
        train.append(members[:take])
        test.append(members[take:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def linear_probe(
    train: LabeledEmbedding,
    test: LabeledEmbedding,
    epochs: int = 200,
    l2: float = 1e-4,
    lr: float = 0.05,
    seed: int = 0,
) -> float:
    """Accuracy of a multinomial softmax probe trained on frozen points.

    Full-batch Adam from zero init, so the result is deterministic; the seed
    is accepted for interface symmetry. L2 applies to weights, not biases.
    """
    if train.z.shape[1] != test.z.shape[1]:
        raise ValueError("train and test points must share a dimension")
    classes, y = np.unique(train.labels, return_inverse=True)
    if classes.size < 2:
        raise ValueError("linear probe needs at least two classes in train")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    n, d = train.z.shape
    params = {"w": np.zeros((d, classes.size)), "b": np.zeros(classes.size)}
    # batch_size 256 cancels the linear scaling, so the step size is lr itself
    state = AdamState.for_params(params, base_lr=lr, batch_size=256)
    onehot = np.zeros((n, classes.size))
    onehot[np.arange(n), y] = 1.0
    for _ in range(epochs):
        logits = train.z @ params["w"] + params["b"]
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / n
        grads = {"w": train.z.T @ g + 2.0 * l2 * params["w"], "b": g.sum(axis=0)}
        adam_step(state, params, grads)
    pred = classes[(test.z @ params["w"] + params["b"]).argmax(axis=1)]
    return float((pred == test.labels).mean())
