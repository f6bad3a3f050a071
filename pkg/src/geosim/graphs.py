"""Neighborhood structure: feature matrices, kNN graphs, predefined edge lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AlphaSchedule",
    "DataMatrix",
    "StructureGraph",
    "build_knn_graph",
    "graph_from_edge_list",
    "normalize_rows",
    "pairwise_euclidean",
    "pairwise_cosine_distance",
]


@dataclass(frozen=True)
class AlphaSchedule:
    """Fusion weight of one graph, interpolated linearly over training."""

    initial: float = 1.0
    final: float = 1.0

    def __post_init__(self) -> None:
        for v in (self.initial, self.final):
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"alpha endpoints must be finite and >= 0, got {v}")

    def value(self, step_fraction: float) -> float:
        """Weight at a point of the schedule, step_fraction in [0, 1]."""
        if not 0.0 <= step_fraction <= 1.0:
            raise ValueError(f"step_fraction must lie in [0, 1], got {step_fraction}")
        return self.initial + (self.final - self.initial) * step_fraction


@dataclass
class DataMatrix:
    """Dense n x D feature matrix with finite float64 entries, n >= 2."""

    values: np.ndarray
    row_ids: list | None = None

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 1:
            raise ValueError(f"need at least 2 rows and 1 column, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature matrix contains non-finite entries")
        if self.row_ids is not None and len(self.row_ids) != v.shape[0]:
            raise ValueError("row_ids length does not match the row count")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class StructureGraph:
    """Undirected weighted graph on n nodes; edges canonical with i < j."""

    n: int
    edges: np.ndarray
    weights: np.ndarray
    source: str = "predefined"
    knn_k: int | None = None
    alpha_schedule: AlphaSchedule = field(default_factory=AlphaSchedule)

    def __post_init__(self) -> None:
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if e.shape[0] != w.shape[0]:
            raise ValueError(f"{e.shape[0]} edges but {w.shape[0]} weights")
        if e.size:
            if (e[:, 0] >= e[:, 1]).any():
                raise ValueError("edges must be canonical i < j, self-loops excluded")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if len(np.unique(e[:, 0] * self.n + e[:, 1])) != e.shape[0]:
                raise ValueError("duplicate edges")
        if w.size and (not np.isfinite(w).all() or (w < 0).any()):
            raise ValueError("edge weights must be finite and non-negative")
        if self.source not in ("knn", "predefined"):
            raise ValueError(f"unknown graph source {self.source!r}")
        self.edges = e
        self.weights = w

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def to_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR adjacency as (indptr, indices, weights)."""
        heads = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        tails = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        w2 = np.concatenate([self.weights, self.weights])
        order = np.lexsort((tails, heads))
        counts = np.bincount(heads, minlength=self.n)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return indptr, tails[order].astype(np.int64), w2[order]


def pairwise_euclidean(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Dense Euclidean distance matrix via the gram expansion, clipped at zero."""
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    sq = np.einsum("ij,ij->i", a, a)[:, None] + np.einsum("ij,ij->i", b, b)[None, :]
    sq -= 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def normalize_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """L2-normalize rows; zero rows map to the fixed unit direction e_0.

    Returns (unit rows, original norms). The zero-row convention keeps the
    cosine map total; callers treat those rows as constants under gradients.
    """
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = z / safe[:, None]
    zero = norms == 0.0
    if zero.any():
        unit[zero] = 0.0
        unit[zero, 0] = 1.0
    return unit, norms


def pairwise_cosine_distance(a: np.ndarray) -> np.ndarray:
    """Dense 1 - cosine similarity matrix, clipped to [0, 2]."""
    unit, _ = normalize_rows(a)
    d = 1.0 - unit @ unit.T
    np.clip(d, 0.0, 2.0, out=d)
    return d


def _distance_block(x: np.ndarray, start: int, stop: int, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return pairwise_euclidean(x[start:stop], x)
    # cosine: rows were pre-normalized by the caller
    d = 1.0 - x[start:stop] @ x.T
    np.clip(d, 0.0, 2.0, out=d)
    return d


def build_knn_graph(X, k: int, metric: str = "euclidean") -> StructureGraph:
    """Exact union-symmetrized kNN graph.

    Ties at the rank-k cutoff break toward the smaller index. Distances are
    computed in row blocks so peak memory stays at block x n, not n x n.
    """
    x = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    n = x.shape[0]
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k >= n:
        raise ValueError(f"k must be smaller than the number of points ({n}), got {k}")
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        if (norms == 0.0).any():
            raise ValueError("cosine metric is undefined for all-zero rows")
        x = x / norms[:, None]
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")

    col = np.arange(n)
    nbr = np.empty((n, k), dtype=np.int64)
    nbr_d = np.empty((n, k), dtype=np.float64)
    block = 1024
    for start in range(0, n, block):
        stop = min(start + block, n)
        d = _distance_block(x, start, stop, metric)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.lexsort((np.broadcast_to(col, d.shape), d), axis=-1)
        idx = order[:, :k]
        nbr[start:stop] = idx
        nbr_d[start:stop] = np.take_along_axis(d, idx, axis=1)

    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = nbr.ravel()
    w = nbr_d.ravel()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    _, first = np.unique(lo * n + hi, return_index=True)
    edges = np.stack([lo[first], hi[first]], axis=1)
    return StructureGraph(
        n=n, edges=edges, weights=w[first], source="knn", knn_k=int(k)
    )


def graph_from_edge_list(
    n: int,
    edges,
    weight_mode: str = "unit",
    X=None,
) -> StructureGraph:
    """Undirected graph from (i, j) pairs; self-loops dropped, duplicates merged.

    weight_mode "unit" gives every edge weight 1; "feature_distance" uses the
    Euclidean distance between the endpoints' rows of X.
    """
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        bad = (pairs < 0) | (pairs >= n)
        if bad.any():
            at = int(np.argwhere(bad.any(axis=1))[0, 0])
            raise ValueError(
                f"edge {at}: endpoint {tuple(pairs[at])} out of range [0, {n})"
            )
    keep = pairs[:, 0] != pairs[:, 1]
    pairs = pairs[keep]
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    uniq = np.unique(lo * n + hi)
    e = np.stack([uniq // n, uniq % n], axis=1)
    if weight_mode == "unit":
        w = np.ones(e.shape[0], dtype=np.float64)
    elif weight_mode == "feature_distance":
        if X is None:
            raise ValueError("feature_distance weights need a feature matrix")
        x = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
        if x.shape[0] != n:
            raise ValueError(f"feature matrix has {x.shape[0]} rows, graph has {n}")
        diffs = x[e[:, 0]] - x[e[:, 1]]
        w = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    else:
        raise ValueError(f"unknown weight_mode {weight_mode!r}")
    return StructureGraph(n=n, edges=e, weights=w, source="predefined")
