"""geosim: similarity-preserving embeddings from fused geodesic targets.

One engine covers three jobs. Build weighted neighborhood graphs (kNN or
predefined edges), complete them with geodesic distances, turn distances
into heavy-tailed kernel similarities, and train an embedding (free
coordinates or a small encoder) whose latent similarities match the fused
targets under a choice of losses. Drivers wire this into dimension
reduction, attributed graph embedding, and relation distillation.
"""

from .geodesic import DistanceMatrix, all_pairs_geodesic, geodesic_backend
from .graphs import (
    AlphaSchedule,
    DataMatrix,
    StructureGraph,
    build_knn_graph,
    graph_from_edge_list,
)
from .losses import LossResult, bce_loss, evaluate_loss, gkl_loss, kl_loss, mse_loss
from .metrics import (
    LabeledEmbedding,
    continuity,
    knn_accuracy,
    knn_jaccard,
    linear_probe,
    stratified_split,
    trustworthiness,
)
from .models import EmbeddingModel, backprop_through_similarity, grad_wrt_embedding
from .optim import AdamState, adam_step, adam_step_rows
from .similarity import (
    KernelParams,
    NormalizationStats,
    SimilarityMatrix,
    calibrate_normalization,
    clamp_similarities,
    dynamic_fuse,
    kernel_const,
    latent_similarity,
    latent_similarity_forward,
    log_kernel_const,
    similarity_from_distances,
    static_fuse,
    t_kernel,
    t_kernel_du,
)
from .tasks import (
    RunResult,
    dr_defaults,
    ge_defaults,
    kd_defaults,
    run_dr_task,
    run_ge_task,
    run_kd_task,
)
from .train import EpochLog, TaskSpec, beta_schedule, fit, step_fraction

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AlphaSchedule",
    "DataMatrix",
    "StructureGraph",
    "build_knn_graph",
    "graph_from_edge_list",
    "DistanceMatrix",
    "all_pairs_geodesic",
    "geodesic_backend",
    "KernelParams",
    "NormalizationStats",
    "SimilarityMatrix",
    "t_kernel",
    "t_kernel_du",
    "kernel_const",
    "log_kernel_const",
    "clamp_similarities",
    "calibrate_normalization",
    "similarity_from_distances",
    "static_fuse",
    "dynamic_fuse",
    "latent_similarity",
    "latent_similarity_forward",
    "LossResult",
    "mse_loss",
    "kl_loss",
    "bce_loss",
    "gkl_loss",
    "evaluate_loss",
    "EmbeddingModel",
    "grad_wrt_embedding",
    "backprop_through_similarity",
    "AdamState",
    "adam_step",
    "adam_step_rows",
    "TaskSpec",
    "EpochLog",
    "fit",
    "step_fraction",
    "beta_schedule",
    "RunResult",
    "dr_defaults",
    "ge_defaults",
    "kd_defaults",
    "run_dr_task",
    "run_ge_task",
    "run_kd_task",
    "LabeledEmbedding",
    "trustworthiness",
    "continuity",
    "knn_accuracy",
    "knn_jaccard",
    "linear_probe",
    "stratified_split",
]
