"""Embedding parameterizations and exact gradients through the similarity map."""

from __future__ import annotations

import math

import numpy as np

from .similarity import LatentSimilarityCache

__all__ = ["EmbeddingModel", "grad_wrt_embedding", "backprop_through_similarity"]

LEAKY_SLOPE = 0.01


class EmbeddingModel:
    """Either free per-sample coordinates or a small leaky-relu encoder.

    Free coordinates treat the embedding itself as the parameter table and
    forward() takes row indices. The encoder is a feed-forward stack
    D -> hidden... -> d with leaky-relu on hidden layers only, He-style
    uniform fan-in init, zero biases; forward() takes feature rows and also
    returns the activations of a designated hidden layer (the tap) for
    dynamic target fusion.
    """

    def __init__(self, mode, params, output_dim, widths=None, tap_layer=None, slope=LEAKY_SLOPE):
        self.mode = mode
        self.params = params
        self.output_dim = int(output_dim)
        self.widths = widths
        self.tap_layer = tap_layer
        self.slope = float(slope)

    @classmethod
    def free_coordinates(cls, n: int, output_dim: int, seed: int = 0, init_std: float = 1e-2):
        if n < 1 or output_dim < 1:
            raise ValueError(f"need n >= 1 and output_dim >= 1, got {n}, {output_dim}")
        rng = np.random.default_rng(seed)
        coords = rng.normal(0.0, init_std, size=(n, output_dim))
        return cls(mode="free_coordinates", params={"coords": coords}, output_dim=output_dim)

    @classmethod
    def encoder(
        cls,
        input_dim: int,
        hidden=(256, 256),
        output_dim: int = 2,
        tap_layer: int = 1,
        seed: int = 0,
        slope: float = LEAKY_SLOPE,
    ):
        widths = (int(input_dim), *(int(h) for h in hidden), int(output_dim))
        if min(widths) < 1:
            raise ValueError(f"layer widths must be positive, got {widths}")
        num_layers = len(widths) - 1
        if num_layers < 2:
            raise ValueError("encoder needs at least one hidden layer")
        if not 1 <= tap_layer <= num_layers - 1:
            raise ValueError(f"tap_layer must lie in [1, {num_layers - 1}], got {tap_layer}")
        rng = np.random.default_rng(seed)
        params = {}
        for layer in range(num_layers):
            fan_in = widths[layer]
            limit = math.sqrt(6.0 / fan_in)
            params[f"w{layer}"] = rng.uniform(-limit, limit, size=(widths[layer], widths[layer + 1]))
            params[f"b{layer}"] = np.zeros(widths[layer + 1])
        return cls(
            mode="encoder",
            params=params,
            output_dim=widths[-1],
            widths=widths,
            tap_layer=int(tap_layer),
            slope=slope,
        )

    @property
    def num_layers(self) -> int:
        return 0 if self.widths is None else len(self.widths) - 1

    def forward(self, batch):
        """(Z, tap activations, cache); free mode takes indices, tap is None."""
        if self.mode == "free_coordinates":
            idx = np.asarray(batch, dtype=np.int64)
            coords = self.params["coords"]
            if idx.size and (idx.min() < 0 or idx.max() >= coords.shape[0]):
                raise ValueError("batch index out of range")
            return coords[idx], None, {"idx": idx}
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.widths[0]:
            raise ValueError(f"expected shape (B, {self.widths[0]}), got {x.shape}")
        acts = [x]
        pres = []
        h = x
        for layer in range(self.num_layers):
            a = h @ self.params[f"w{layer}"] + self.params[f"b{layer}"]
            pres.append(a)
            h = np.where(a > 0, a, self.slope * a) if layer < self.num_layers - 1 else a
            acts.append(h)
        return acts[-1], acts[self.tap_layer], {"acts": acts, "pres": pres}

    def backward(self, cache, grad_z: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients for a prior encoder forward."""
        if self.mode != "encoder":
            raise ValueError("backward() is defined for encoder mode only")
        acts, pres = cache["acts"], cache["pres"]
        g = np.asarray(grad_z, dtype=np.float64)
        grads = {}
        for layer in reversed(range(self.num_layers)):
            grads[f"w{layer}"] = acts[layer].T @ g
            grads[f"b{layer}"] = g.sum(axis=0)
            if layer > 0:
                g = g @ self.params[f"w{layer}"].T
                g = g * np.where(pres[layer - 1] > 0, 1.0, self.slope)
        return grads

    def embed(self, X=None) -> np.ndarray:
        """Embedding of the full dataset (features for encoders, else all rows)."""
        if self.mode == "free_coordinates":
            return self.params["coords"].copy()
        if X is None:
            raise ValueError("encoder mode needs the feature matrix to embed")
        x = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
        z, _, _ = self.forward(x)
        return z


def grad_wrt_embedding(grad_wrt_p: np.ndarray, cache: LatentSimilarityCache) -> np.ndarray:
    """Chain dLoss/dp_Z through kernel, normalization, and distance to dLoss/dZ.

    Clamped similarities contribute zero. Coincident points under the
    Euclidean distance take the zero subgradient; rows that were all-zero
    under the cosine distance are constants and also get zero.
    """
    g = np.asarray(grad_wrt_p, dtype=np.float64)
    if g.shape != cache.p_raw.shape:
        raise ValueError(f"gradient shape {g.shape} does not match {cache.p_raw.shape}")
    nu = cache.kernel.nu
    u = cache.u
    dp_dd = cache.p_raw * (-(nu + 1.0)) * u / (nu + u * u) / cache.stats.sigma_latent
    G = g * cache.unclamped * dp_dd
    np.fill_diagonal(G, 0.0)
    W = G + G.T
    if cache.distance == "euclidean":
        d = cache.distances
        W = np.where(d > 0, W / np.where(d > 0, d, 1.0), 0.0)
        return W.sum(axis=1)[:, None] * cache.z - W @ cache.z
    # one_minus_cosine: d_ij = 1 - zhat_i . zhat_j, so d d_ij / d zhat_i = -zhat_j
    grad_hat = -(W @ cache.normalized)
    radial = np.einsum("ij,ij->i", grad_hat, cache.normalized)
    tangent = grad_hat - radial[:, None] * cache.normalized
    scale = np.where(cache.norms > 0, cache.norms, np.inf)
    return tangent / scale[:, None]


def backprop_through_similarity(
    grad_wrt_p: np.ndarray,
    cache: LatentSimilarityCache,
    model: EmbeddingModel | None = None,
    model_cache=None,
):
    """Full backward pass: loss gradient on p_Z to parameter gradients.

    Returns dLoss/dZ when no model is given (or for free coordinates, whose
    batch rows are the parameters); otherwise the encoder's gradient dict.
    """
    dz = grad_wrt_embedding(grad_wrt_p, cache)
    if model is None or model.mode == "free_coordinates":
        return dz
    return model.backward(model_cache, dz)
