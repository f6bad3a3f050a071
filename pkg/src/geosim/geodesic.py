"""Geodesic completion: all-pairs shortest paths plus disconnected-pair fill."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _geodesic_py
from .graphs import StructureGraph

try:
    from . import _geodesic as _compiled
except ImportError:  # extension not built; the pure backend is a drop-in
    _compiled = None

_active = _compiled if _compiled is not None else _geodesic_py

__all__ = ["DistanceMatrix", "all_pairs_geodesic", "geodesic_backend"]


def geodesic_backend() -> str:
    """Shortest-path backend selected at import: "compiled" or "python"."""
    return "compiled" if _active is not _geodesic_py else "python"


def _resolve_backend(name: str | None):
    if name is None:
        return _active
    if name == "python":
        return _geodesic_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled backend requested but the extension is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@dataclass
class DistanceMatrix:
    """Symmetric non-negative distances with a zero diagonal, all finite."""

    d: np.ndarray
    disconnected_fill: float
    finite_max: float

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {d.shape}")
        if not np.isfinite(d).all():
            raise ValueError("distance matrix contains non-finite entries")
        if (d < 0).any():
            raise ValueError("distances must be non-negative")
        if (np.diag(d) != 0).any():
            raise ValueError("distance matrix diagonal must be zero")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        self.d = d

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_dense(cls, d: np.ndarray) -> "DistanceMatrix":
        """Wrap a precomputed dense distance matrix (no geodesic completion).

        Enforces exact symmetry by taking the elementwise minimum with the
        transpose, which absorbs last-ulp asymmetry from BLAS products.
        """
        d = np.asarray(d, dtype=np.float64).copy()
        d = np.minimum(d, d.T)
        np.fill_diagonal(d, 0.0)
        fmax = float(d.max()) if d.size else 0.0
        return cls(d=d, disconnected_fill=fmax, finite_max=fmax)


def all_pairs_geodesic(
    graph: StructureGraph,
    disconnected_fill: float | None = None,
    hop_limit: int | None = None,
    backend: str | None = None,
) -> DistanceMatrix:
    """Shortest-path distance between every node pair of an undirected graph.

    Pairs with no connecting path are filled with twice the largest finite
    geodesic unless an explicit disconnected_fill is given. hop_limit > 0
    truncates each search to that many edges from the source (approximate;
    off by default).
    """
    if hop_limit is not None and hop_limit < 1:
        raise ValueError(f"hop_limit must be >= 1, got {hop_limit}")
    impl = _resolve_backend(backend)
    indptr, indices, weights = graph.to_csr()
    raw = impl.dijkstra_all_sources(
        indptr, indices, weights, -1 if hop_limit is None else int(hop_limit)
    )
    # Reversed traversals can differ in the last ulp; take the smaller sum.
    raw = np.minimum(raw, raw.T)
    np.fill_diagonal(raw, 0.0)
    finite = raw[np.isfinite(raw)]
    finite_max = float(finite.max()) if finite.size else 0.0
    fill = 2.0 * finite_max if disconnected_fill is None else float(disconnected_fill)
    if not np.isfinite(fill) or fill < finite_max:
        raise ValueError("disconnected_fill must be finite and >= every geodesic")
    raw[~np.isfinite(raw)] = fill
    return DistanceMatrix(d=raw, disconnected_fill=fill, finite_max=finite_max)
