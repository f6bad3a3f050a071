"""Distance-to-similarity kernels, per-point calibration, and target fusion.

All similarities pass through one heavy-tailed kernel

    kappa(d, nu) = C(nu) * (1 + d^2 / nu) ** -((nu + 1) / 2)

whose normalizing constant C(nu) rises from ~0.04 toward 1 as nu grows; in the
nu -> inf limit kappa approaches the Gaussian exp(-d^2 / 2). Everything is
evaluated in log space so extreme nu stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geodesic import DistanceMatrix
from .graphs import AlphaSchedule, normalize_rows, pairwise_euclidean

__all__ = [
    "DEFAULT_CLAMP_EPS",
    "KernelParams",
    "NormalizationStats",
    "SimilarityMatrix",
    "LatentSimilarityCache",
    "log_kernel_const",
    "kernel_const",
    "t_kernel",
    "t_kernel_du",
    "clamp_similarities",
    "calibrate_normalization",
    "similarity_from_distances",
    "static_fuse",
    "dynamic_fuse",
    "latent_similarity",
    "latent_similarity_forward",
]

DEFAULT_CLAMP_EPS = 1e-7
SIGMA_FLOOR = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)
_LATENT_DISTANCES = ("euclidean", "one_minus_cosine")


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if not math.isfinite(nu) or nu <= 0:
        raise ValueError(f"nu must be a finite positive number, got {nu}")
    return nu


def log_kernel_const(nu: float) -> float:
    """log C(nu), computed from log-gamma so large nu cannot overflow."""
    nu = _check_nu(nu)
    return (
        0.5 * _LOG_2PI
        + math.lgamma(0.5 * (nu + 1.0))
        - 0.5 * math.log(nu * math.pi)
        - math.lgamma(0.5 * nu)
    )


def kernel_const(nu: float) -> float:
    """Normalizing constant C(nu), in (0, 1] for nu > 0."""
    return math.exp(log_kernel_const(nu))


def t_kernel(d, nu: float):
    """Kernel value kappa(d, nu); scalar in, scalar out, arrays elementwise."""
    nu = _check_nu(nu)
    x = np.asarray(d, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("kernel input distances must be finite")
    val = np.exp(log_kernel_const(nu) - 0.5 * (nu + 1.0) * np.log1p(x * x / nu))
    return float(val) if x.ndim == 0 else val


def t_kernel_du(d, nu: float):
    """Derivative of t_kernel in its distance argument: -kappa*(nu+1)*d/(nu+d^2)."""
    nu = _check_nu(nu)
    x = np.asarray(d, dtype=np.float64)
    val = t_kernel(x, nu) * (-(nu + 1.0)) * x / (nu + x * x)
    return float(val) if x.ndim == 0 else val


@dataclass(frozen=True)
class KernelParams:
    """Kernel shape nu plus the clamp bound applied to similarities."""

    nu: float
    clamp_eps: float = DEFAULT_CLAMP_EPS

    def __post_init__(self) -> None:
        _check_nu(self.nu)
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps must lie in (0, 0.5), got {self.clamp_eps}")


@dataclass
class NormalizationStats:
    """Distance normalization: per-point input shifts and global scales.

    Input-space similarities use (d - mu_per_point[i]) / sigma for row i;
    latent-space similarities use (d - mu_latent) / sigma_latent.
    """

    mu_per_point: np.ndarray | None = None
    sigma: float = 1.0
    mu_latent: float = 0.0
    sigma_latent: float = 1.0
    # per-point scales as found by calibration, before averaging into sigma
    sigma_per_point: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.mu_per_point is not None:
            mu = np.asarray(self.mu_per_point, dtype=np.float64).reshape(-1)
            if not np.isfinite(mu).all():
                raise ValueError("mu_per_point must be finite")
            self.mu_per_point = mu
        if self.sigma_per_point is not None:
            self.sigma_per_point = np.asarray(self.sigma_per_point, dtype=np.float64).reshape(-1)
        for name in ("sigma", "sigma_latent"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a finite positive number, got {v}")
        if not math.isfinite(float(self.mu_latent)):
            raise ValueError("mu_latent must be finite")


@dataclass
class SimilarityMatrix:
    """Square similarity matrix: zero diagonal, off-diagonal in [eps, 1-eps]."""

    p: np.ndarray
    role: str = "target"
    clamp_eps: float = DEFAULT_CLAMP_EPS

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {p.shape}")
        if self.role not in ("target", "latent"):
            raise ValueError(f"unknown role {self.role!r}")
        if (np.diag(p) != 0).any():
            raise ValueError("similarity diagonal must be zero")
        off = ~np.eye(p.shape[0], dtype=bool)
        vals = p[off]
        if vals.size and (
            not np.isfinite(vals).all()
            or vals.min() < self.clamp_eps
            or vals.max() > 1.0 - self.clamp_eps
        ):
            raise ValueError("off-diagonal similarities must lie in [eps, 1 - eps]")
        self.p = p

    @property
    def n(self) -> int:
        return self.p.shape[0]


def _matrix_values(x) -> np.ndarray:
    if isinstance(x, SimilarityMatrix):
        return x.p
    return np.asarray(x, dtype=np.float64)


def _distance_values(d) -> np.ndarray:
    if isinstance(d, DistanceMatrix):
        return d.d
    return np.asarray(d, dtype=np.float64)


def clamp_similarities(p: np.ndarray, clamp_eps: float = DEFAULT_CLAMP_EPS) -> np.ndarray:
    """Clip into [eps, 1 - eps] and zero the diagonal."""
    out = np.clip(p, clamp_eps, 1.0 - clamp_eps)
    np.fill_diagonal(out, 0.0)
    return out


def calibrate_normalization(
    distances,
    target_neighbors: int = 5,
    mode: str = "statistic",
    nu: float = 1e5,
) -> NormalizationStats:
    """Per-point shift mu_i and a shared scale sigma from a distance matrix.

    mu_i is the distance to the nearest neighbor. "statistic" sets sigma to the
    mean over points of the standard deviation of the target_neighbors smallest
    off-diagonal distances. "binary_search" instead bisects a per-point sigma_i
    until the summed kernel similarity over those neighbors hits
    log2(target_neighbors + 1), then averages; nu is the kernel shape used
    there. Either way sigma is floored at 1e-12.
    """
    d = _distance_values(distances)
    n = d.shape[0]
    k = int(target_neighbors)
    if k < 1 or k >= n:
        raise ValueError(f"target_neighbors must lie in [1, {n - 1}], got {target_neighbors}")
    if mode not in ("statistic", "binary_search"):
        raise ValueError(f"unknown calibration mode {mode!r}")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    row_sorted = np.sort(masked, axis=1)
    knn_vals = row_sorted[:, :k]
    mu = row_sorted[:, 0]
    if mode == "statistic":
        per_point = knn_vals.std(axis=1)
        sigma = float(per_point.mean())
    else:
        target = math.log2(k + 1)
        centered = knn_vals - mu[:, None]
        lo = np.full(n, SIGMA_FLOOR)
        hi = np.ones(n)
        # grow the bracket: summed similarity rises monotonically with sigma
        for _ in range(60):
            need = t_kernel(centered / hi[:, None], nu).sum(axis=1) < target
            if not need.any():
                break
            hi[need] *= 2.0
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            val = t_kernel(centered / mid[:, None], nu).sum(axis=1)
            high = val >= target
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        per_point = 0.5 * (lo + hi)
        sigma = float(per_point.mean())
    return NormalizationStats(
        mu_per_point=mu, sigma=max(sigma, SIGMA_FLOOR), sigma_per_point=per_point
    )


def similarity_from_distances(
    distances, stats: NormalizationStats, kernel: KernelParams
) -> SimilarityMatrix:
    """Row-conditional target similarities p[i, j] = kappa((d_ij - mu_i)/sigma)."""
    d = _distance_values(distances)
    if stats.mu_per_point is None:
        raise ValueError("stats must carry per-point shifts; run calibrate_normalization")
    if stats.mu_per_point.shape[0] != d.shape[0]:
        raise ValueError("stats were calibrated for a different number of points")
    u = (d - stats.mu_per_point[:, None]) / stats.sigma
    p = t_kernel(u, kernel.nu)
    return SimilarityMatrix(
        p=clamp_similarities(p, kernel.clamp_eps), role="target", clamp_eps=kernel.clamp_eps
    )


def static_fuse(parts, step_fraction: float, clamp_eps: float = DEFAULT_CLAMP_EPS) -> SimilarityMatrix:
    """Weighted sum of per-graph targets at one point of the alpha schedules."""
    parts = list(parts)
    if not parts:
        raise ValueError("static_fuse needs at least one (similarity, schedule) part")
    acc = None
    for sim, schedule in parts:
        p = _matrix_values(sim)
        if acc is None:
            acc = np.zeros_like(p)
        elif p.shape != acc.shape:
            raise ValueError("fused similarity matrices must share a shape")
        acc = acc + schedule.value(step_fraction) * p
    return SimilarityMatrix(
        p=clamp_similarities(acc, clamp_eps), role="target", clamp_eps=clamp_eps
    )


def dynamic_fuse(
    p_static, p_intermediate, beta: float, clamp_eps: float = DEFAULT_CLAMP_EPS
) -> SimilarityMatrix:
    """Blend beta * static target + intermediate-layer similarity, then clamp."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    a = _matrix_values(p_static)
    b = _matrix_values(p_intermediate)
    if a.shape != b.shape:
        raise ValueError("static and intermediate similarities must share a shape")
    return SimilarityMatrix(
        p=clamp_similarities(beta * a + b, clamp_eps), role="target", clamp_eps=clamp_eps
    )


@dataclass
class LatentSimilarityCache:
    """Forward-pass byproducts needed to backpropagate through the similarity."""

    z: np.ndarray
    distance: str
    distances: np.ndarray
    u: np.ndarray
    p_raw: np.ndarray
    unclamped: np.ndarray
    normalized: np.ndarray | None
    norms: np.ndarray | None
    stats: NormalizationStats
    kernel: KernelParams


def latent_similarity_forward(
    z: np.ndarray,
    distance: str,
    stats: NormalizationStats,
    kernel: KernelParams,
) -> tuple[np.ndarray, LatentSimilarityCache]:
    """Clamped latent similarities plus the cache for the backward pass."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"expected a 2-D embedding, got shape {z.shape}")
    if distance not in _LATENT_DISTANCES:
        raise ValueError(f"distance must be one of {_LATENT_DISTANCES}, got {distance!r}")
    normalized = norms = None
    if distance == "euclidean":
        dmat = pairwise_euclidean(z)
    else:
        normalized, norms = normalize_rows(z)
        dmat = 1.0 - normalized @ normalized.T
        np.clip(dmat, 0.0, 2.0, out=dmat)
    np.fill_diagonal(dmat, 0.0)
    u = (dmat - stats.mu_latent) / stats.sigma_latent
    p_raw = t_kernel(u, kernel.nu)
    p = clamp_similarities(p_raw, kernel.clamp_eps)
    unclamped = (p_raw >= kernel.clamp_eps) & (p_raw <= 1.0 - kernel.clamp_eps)
    cache = LatentSimilarityCache(
        z=z,
        distance=distance,
        distances=dmat,
        u=u,
        p_raw=p_raw,
        unclamped=unclamped,
        normalized=normalized,
        norms=norms,
        stats=stats,
        kernel=kernel,
    )
    return p, cache


def latent_similarity(
    z: np.ndarray,
    distance: str = "euclidean",
    stats: NormalizationStats | None = None,
    kernel: KernelParams | None = None,
) -> SimilarityMatrix:
    """Pairwise similarities of an embedding under the latent kernel."""
    stats = stats if stats is not None else NormalizationStats()
    kernel = kernel if kernel is not None else KernelParams(nu=0.01)
    p, _ = latent_similarity_forward(z, distance, stats, kernel)
    return SimilarityMatrix(p=p, role="latent", clamp_eps=kernel.clamp_eps)
