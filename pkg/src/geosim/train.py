"""Mini-batch training loop fitting embeddings to fused similarity targets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import AlphaSchedule, DataMatrix
from .losses import LOSS_KINDS, evaluate_loss
from .models import EmbeddingModel, grad_wrt_embedding
from .optim import AdamState, adam_step, adam_step_rows
from .similarity import (
    DEFAULT_CLAMP_EPS,
    KernelParams,
    NormalizationStats,
    SimilarityMatrix,
    clamp_similarities,
    latent_similarity_forward,
)

__all__ = ["TaskSpec", "EpochLog", "fit", "step_fraction", "beta_schedule"]

_TASKS = ("dr", "ge", "kd")
_MODEL_MODES = ("free_coordinates", "encoder")
_FUSIONS = ("static", "dynamic")
_LATENT = ("euclidean", "one_minus_cosine")
_CALIBRATIONS = ("statistic", "binary_search")


@dataclass
class TaskSpec:
    """Hyperparameters of one embedding run; defaults suit dimension reduction."""

    task: str = "dr"
    loss: str = "gkl"
    gamma: float = 0.1
    nu_x: float = 1e5
    nu_z: float = 0.01
    sigma_x: float | None = None
    mu_z: float = 0.0
    sigma_z: float = 1.0
    latent_distance: str = "euclidean"
    fusion: str = "static"
    epochs: int = 200
    batch_size: int = 256
    base_lr: float = 0.001
    seed: int = 0
    pair_mask_fraction: float = 0.0
    output_dim: int = 2
    model_mode: str = "free_coordinates"
    hidden_widths: tuple = (256, 256)
    tap_layer: int = 1
    init_std: float = 1e-2
    knn_k: int = 10
    knn_metric: str = "euclidean"
    calibration: str = "statistic"
    target_neighbors: int = 5
    clamp_eps: float = DEFAULT_CLAMP_EPS
    alpha2: float = 1.0
    alpha2_final: float | None = None

    def __post_init__(self) -> None:
        if self.task not in _TASKS:
            raise ValueError(f"task must be one of {_TASKS}, got {self.task!r}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.model_mode not in _MODEL_MODES:
            raise ValueError(f"model_mode must be one of {_MODEL_MODES}, got {self.model_mode!r}")
        if self.fusion not in _FUSIONS:
            raise ValueError(f"fusion must be one of {_FUSIONS}, got {self.fusion!r}")
        if self.latent_distance not in _LATENT:
            raise ValueError(f"latent_distance must be one of {_LATENT}")
        if self.calibration not in _CALIBRATIONS:
            raise ValueError(f"calibration must be one of {_CALIBRATIONS}")
        if self.fusion == "dynamic" and self.model_mode != "encoder":
            raise ValueError("dynamic fusion taps an encoder layer; model_mode must be 'encoder'")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if not 0.0 <= self.pair_mask_fraction < 1.0:
            raise ValueError(f"pair_mask_fraction must lie in [0, 1), got {self.pair_mask_fraction}")
        if self.output_dim < 1:
            raise ValueError(f"output_dim must be >= 1, got {self.output_dim}")
        for name in ("nu_x", "nu_z", "sigma_z", "base_lr"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a finite positive number, got {v}")
        if self.sigma_x is not None and (not math.isfinite(self.sigma_x) or self.sigma_x <= 0):
            raise ValueError(f"sigma_x must be a finite positive number, got {self.sigma_x}")
        if self.gamma < 0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.alpha2 < 0:
            raise ValueError(f"alpha2 must be >= 0, got {self.alpha2}")
        if self.alpha2_final is not None and self.alpha2_final < 0:
            raise ValueError(f"alpha2_final must be >= 0, got {self.alpha2_final}")

    def alpha2_schedule(self) -> AlphaSchedule:
        final = self.alpha2 if self.alpha2_final is None else self.alpha2_final
        return AlphaSchedule(initial=self.alpha2, final=final)

    def latent_kernel(self) -> KernelParams:
        return KernelParams(nu=self.nu_z, clamp_eps=self.clamp_eps)

    def latent_stats(self) -> NormalizationStats:
        return NormalizationStats(mu_latent=self.mu_z, sigma_latent=self.sigma_z)


@dataclass
class EpochLog:
    epoch: int
    loss: float
    beta: float
    effective_lr: float


def step_fraction(step: int, total_steps: int) -> float:
    """Schedule position in [0, 1]; both endpoints are reached exactly."""
    if total_steps <= 1:
        return 0.0
    return step / (total_steps - 1)


def beta_schedule(fraction: float) -> float:
    """Dynamic-fusion weight on the static target: decays linearly 1 -> 0."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    return 1.0 - fraction


def _target_block(part, rows: np.ndarray) -> np.ndarray:
    if callable(part):
        return np.asarray(part(rows), dtype=np.float64)
    return part[np.ix_(rows, rows)]


def _resolve_targets(targets):
    resolved = []
    for part, schedule in targets:
        if isinstance(part, SimilarityMatrix):
            part = part.p
        elif not callable(part):
            part = np.asarray(part, dtype=np.float64)
        resolved.append((part, schedule))
    if not resolved:
        raise ValueError("fit needs at least one similarity target")
    return resolved


def fit(spec: TaskSpec, X, targets, n: int | None = None):
    """Train an embedding against fused targets; returns (model, epoch logs).

    targets is a sequence of (similarity, AlphaSchedule) parts; a part is a
    dense n x n matrix or a callable mapping batch row indices to the
    corresponding square block (for targets too large to materialize).
    """
    resolved = _resolve_targets(targets)
    x = None
    if X is not None:
        x = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
        n = x.shape[0] if n is None else n
    if n is None:
        for part, _ in resolved:
            if not callable(part):
                n = part.shape[0]
                break
    if n is None:
        raise ValueError("cannot infer the dataset size; pass n or a dense target")
    for part, _ in resolved:
        if not callable(part) and part.shape != (n, n):
            raise ValueError(f"target shape {part.shape} does not match n={n}")
    if spec.model_mode == "encoder":
        if x is None:
            raise ValueError("encoder mode needs the feature matrix X")
        model = EmbeddingModel.encoder(
            input_dim=x.shape[1],
            hidden=spec.hidden_widths,
            output_dim=spec.output_dim,
            tap_layer=spec.tap_layer,
            seed=spec.seed,
        )
    else:
        model = EmbeddingModel.free_coordinates(
            n=n, output_dim=spec.output_dim, seed=spec.seed, init_std=spec.init_std
        )
    state = AdamState.for_params(model.params, base_lr=spec.base_lr, batch_size=spec.batch_size)
    kernel_z = spec.latent_kernel()
    stats_z = spec.latent_stats()
    rng = np.random.default_rng(spec.seed)

    batch = min(spec.batch_size, n)
    # Batches of a single point carry no pairs; the trailing partial batch is
    # kept only when it has at least two rows.
    starts = [s for s in range(0, n, batch) if min(s + batch, n) - s >= 2]
    total_steps = spec.epochs * len(starts)
    if total_steps == 0:
        raise ValueError("no trainable batches; need at least two points")

    logs: list[EpochLog] = []
    gstep = 0
    for epoch in range(1, spec.epochs + 1):
        order = rng.permutation(n)
        losses = []
        beta = 1.0
        for s in starts:
            rows = order[s : min(s + batch, n)]
            fraction = step_fraction(gstep, total_steps)
            gstep += 1

            block = None
            for part, schedule in resolved:
                term = schedule.value(fraction) * _target_block(part, rows)
                block = term if block is None else block + term
            target = clamp_similarities(block, spec.clamp_eps)

            if spec.model_mode == "encoder":
                z, tap, model_cache = model.forward(x[rows])
            else:
                z, tap, model_cache = model.forward(rows)

            if spec.fusion == "dynamic":
                beta = beta_schedule(fraction)
                p_tap, _ = latent_similarity_forward(tap, spec.latent_distance, stats_z, kernel_z)
                target = clamp_similarities(beta * target + p_tap, spec.clamp_eps)

            pair_mask = None
            if spec.pair_mask_fraction > 0.0:
                pair_mask = rng.random((len(rows), len(rows))) >= spec.pair_mask_fraction

            p_lat, sim_cache = latent_similarity_forward(z, spec.latent_distance, stats_z, kernel_z)
            result = evaluate_loss(spec.loss, target, p_lat, gamma=spec.gamma, pair_mask=pair_mask)
            if not math.isfinite(result.value):
                raise FloatingPointError(
                    f"loss became non-finite at epoch {epoch}, step {gstep} (kind={spec.loss})"
                )
            dz = grad_wrt_embedding(result.grad_wrt_latent, sim_cache)
            if spec.model_mode == "encoder":
                adam_step(state, model.params, model.backward(model_cache, dz))
            else:
                adam_step_rows(state, "coords", model.params["coords"], rows, dz)
            losses.append(result.value)

        logs.append(
            EpochLog(
                epoch=epoch,
                loss=float(np.mean(losses)),
                beta=beta if spec.fusion == "dynamic" else 1.0,
                effective_lr=state.effective_lr,
            )
        )
    return model, logs
