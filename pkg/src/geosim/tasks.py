"""End-to-end drivers: dimension reduction, graph embedding, distillation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geodesic import DistanceMatrix, all_pairs_geodesic
from .graphs import AlphaSchedule, DataMatrix, build_knn_graph, graph_from_edge_list, normalize_rows
from .models import EmbeddingModel
from .similarity import KernelParams, calibrate_normalization, similarity_from_distances
from .train import EpochLog, TaskSpec, fit

__all__ = [
    "RunResult",
    "DR_SIGMA_X_PRESETS",
    "GE_PRESETS",
    "dr_defaults",
    "ge_defaults",
    "kd_defaults",
    "run_dr_task",
    "run_ge_task",
    "run_kd_task",
]

# Input-space scale overrides that worked well for the classic image sets.
DR_SIGMA_X_PRESETS = {"mnist": 5.0, "fmnist": 20.0}

# Citation-network presets: latent kernel shape and feature-graph weight.
GE_PRESETS = {
    "cora": {"nu_z": 1e-3, "alpha2": 1.0},
    "citeseer": {"nu_z": 3e-3, "alpha2": 0.5},
    "pubmed": {"nu_z": 3e-3, "alpha2": 50.0},
}

# Beyond this size a dense n x n target is not materialized up front;
# distillation targets are then served as on-demand row blocks.
DENSE_TARGET_LIMIT = 8192


@dataclass
class RunResult:
    embedding: np.ndarray
    model: EmbeddingModel
    log: list[EpochLog]


def dr_defaults(**overrides) -> TaskSpec:
    """Dimension-reduction defaults: geodesic kNN target, free 2-D coordinates."""
    base = dict(
        task="dr",
        loss="gkl",
        nu_x=1e5,
        nu_z=0.01,
        sigma_x=5.0,
        mu_z=0.0,
        sigma_z=1.0,
        latent_distance="euclidean",
        model_mode="free_coordinates",
        output_dim=2,
        knn_k=10,
        calibration="binary_search",
        epochs=500,
        batch_size=1024,
        base_lr=0.02,
        init_std=1.0,
    )
    base.update(overrides)
    return TaskSpec(**base)


def ge_defaults(preset: str | None = None, **overrides) -> TaskSpec:
    """Graph-embedding defaults: predefined edges fused with a feature kNN graph."""
    base = dict(
        task="ge",
        loss="bce",
        nu_x=1e5,
        nu_z=1e-3,
        sigma_x=None,
        latent_distance="euclidean",
        model_mode="free_coordinates",
        output_dim=128,
        knn_k=10,
        calibration="binary_search",
        alpha2=1.0,
        epochs=300,
    )
    if preset is not None:
        if preset not in GE_PRESETS:
            raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(GE_PRESETS)}")
        base.update(GE_PRESETS[preset])
    base.update(overrides)
    return TaskSpec(**base)


def kd_defaults(**overrides) -> TaskSpec:
    """Distillation defaults: cosine relations both sides, BCE, small encoder."""
    base = dict(
        task="kd",
        loss="bce",
        nu_x=100.0,
        nu_z=100.0,
        sigma_x=1.0,
        sigma_z=1.0,
        mu_z=0.0,
        latent_distance="one_minus_cosine",
        model_mode="encoder",
        output_dim=64,
        epochs=200,
    )
    base.update(overrides)
    return TaskSpec(**base)


def _as_data(X) -> DataMatrix:
    return X if isinstance(X, DataMatrix) else DataMatrix(values=np.asarray(X, dtype=np.float64))


def _knn_geodesic_target(X: DataMatrix, spec: TaskSpec, calibration: str):
    graph = build_knn_graph(X, spec.knn_k, spec.knn_metric)
    dist = all_pairs_geodesic(graph)
    stats = calibrate_normalization(
        dist, target_neighbors=spec.target_neighbors, mode=calibration, nu=spec.nu_x
    )
    if spec.sigma_x is not None:
        stats = replace(stats, sigma=spec.sigma_x)
    return similarity_from_distances(dist, stats, KernelParams(spec.nu_x, spec.clamp_eps))


def run_dr_task(X, spec: TaskSpec | None = None) -> RunResult:
    """Embed features by preserving geodesic kNN similarities."""
    spec = spec if spec is not None else dr_defaults()
    data = _as_data(X)
    target = _knn_geodesic_target(data, spec, spec.calibration)
    model, log = fit(spec, data, [(target, AlphaSchedule())])
    return RunResult(embedding=model.embed(data), model=model, log=log)


def run_ge_task(X, edges, spec: TaskSpec | None = None) -> RunResult:
    """Embed nodes from a predefined graph fused with a feature kNN graph.

    The predefined graph gets feature-distance edge weights, geodesic
    completion, and statistic calibration with weight fixed at 1; the kNN
    graph follows the spec's calibration mode and alpha2 schedule.
    """
    spec = spec if spec is not None else ge_defaults()
    data = _as_data(X)
    pre = graph_from_edge_list(data.n, edges, weight_mode="feature_distance", X=data)
    if pre.num_edges == 0:
        raise ValueError("the predefined graph has no edges")
    dist1 = all_pairs_geodesic(pre)
    stats1 = calibrate_normalization(
        dist1, target_neighbors=spec.target_neighbors, mode="statistic", nu=spec.nu_x
    )
    if spec.sigma_x is not None:
        stats1 = replace(stats1, sigma=spec.sigma_x)
    p1 = similarity_from_distances(dist1, stats1, KernelParams(spec.nu_x, spec.clamp_eps))
    p2 = _knn_geodesic_target(data, spec, spec.calibration)
    targets = [(p1, AlphaSchedule()), (p2, spec.alpha2_schedule())]
    model, log = fit(spec, data, targets)
    return RunResult(embedding=model.embed(data), model=model, log=log)


def run_kd_task(X, teacher, spec: TaskSpec | None = None) -> RunResult:
    """Distill a teacher's cosine relation structure into a student encoder.

    The target is the kernel similarity of the teacher's full pairwise
    1 - cosine matrix (no kNN sparsification, no geodesics); the student is
    an encoder trained under the cosine latent distance.
    """
    spec = spec if spec is not None else kd_defaults()
    if spec.model_mode != "encoder":
        raise ValueError("distillation trains an encoder student; set model_mode='encoder'")
    data = _as_data(X)
    t = np.asarray(teacher.values if isinstance(teacher, DataMatrix) else teacher, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != data.n:
        raise ValueError(f"teacher rows {t.shape} do not match the student inputs ({data.n})")
    unit, _ = normalize_rows(t)

    def teacher_block(rows: np.ndarray) -> np.ndarray:
        sub = unit[rows]
        d = 1.0 - sub @ unit.T  # rows x n, enough to calibrate mu over all points
        np.clip(d, 0.0, 2.0, out=d)
        return d

    if data.n <= DENSE_TARGET_LIMIT:
        d = 1.0 - unit @ unit.T
        np.clip(d, 0.0, 2.0, out=d)
        dist = DistanceMatrix.from_dense(d)
        stats = calibrate_normalization(
            dist, target_neighbors=spec.target_neighbors, mode=spec.calibration, nu=spec.nu_x
        )
        if spec.sigma_x is not None:
            stats = replace(stats, sigma=spec.sigma_x)
        target = similarity_from_distances(dist, stats, KernelParams(spec.nu_x, spec.clamp_eps))
        parts = [(target, AlphaSchedule())]
    else:
        # Row-block mode: never materialize the n x n target. mu_i is the
        # nearest-neighbor distance, computed in streaming passes.
        from .similarity import clamp_similarities, t_kernel

        mu = np.empty(data.n)
        block = 2048
        knn_rows = np.empty((data.n, spec.target_neighbors))
        for s in range(0, data.n, block):
            rows = np.arange(s, min(s + block, data.n))
            d = teacher_block(rows)
            d[np.arange(len(rows)), rows] = np.inf
            part = np.sort(d, axis=1)[:, : spec.target_neighbors]
            knn_rows[rows] = part
            mu[rows] = part[:, 0]
        if spec.sigma_x is not None:
            sigma = spec.sigma_x
        else:
            sigma = max(float(knn_rows.std(axis=1).mean()), 1e-12)

        def part_fn(rows: np.ndarray) -> np.ndarray:
            d = teacher_block(rows)[:, rows]
            np.fill_diagonal(d, 0.0)
            p = t_kernel((d - mu[rows][:, None]) / sigma, spec.nu_x)
            return clamp_similarities(p, spec.clamp_eps)

        parts = [(part_fn, AlphaSchedule())]

    model, log = fit(spec, data, parts, n=data.n)
    return RunResult(embedding=model.embed(data), model=model, log=log)
