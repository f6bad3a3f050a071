"""Pairwise similarity losses with analytic gradients.

Every loss is a sum over ordered off-diagonal pairs (i, j), i != j; the
returned gradient is with respect to the latent similarities p_Z and is
exactly zero on the diagonal and on masked-out pairs. Inputs are assumed
clamped into [eps, 1 - eps] off the diagonal, which keeps every log finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .similarity import SimilarityMatrix

__all__ = ["LOSS_KINDS", "LossResult", "mse_loss", "kl_loss", "bce_loss", "gkl_loss", "evaluate_loss"]

LOSS_KINDS = ("mse", "kl", "bce", "gkl")


@dataclass
class LossResult:
    value: float
    grad_wrt_latent: np.ndarray
    kind: str
    gamma: float = 0.0


def _prepare(px, pz, pair_mask):
    px = px.p if isinstance(px, SimilarityMatrix) else np.asarray(px, dtype=np.float64)
    pz = pz.p if isinstance(pz, SimilarityMatrix) else np.asarray(pz, dtype=np.float64)
    if px.ndim != 2 or px.shape[0] != px.shape[1]:
        raise ValueError(f"expected square similarity matrices, got shape {px.shape}")
    if px.shape != pz.shape:
        raise ValueError(f"similarity shapes disagree: {px.shape} vs {pz.shape}")
    mask = ~np.eye(px.shape[0], dtype=bool)
    if pair_mask is not None:
        pm = np.asarray(pair_mask)
        if pm.shape != px.shape:
            raise ValueError(f"pair_mask shape {pm.shape} does not match {px.shape}")
        mask &= pm.astype(bool)
    # Masked entries are later multiplied by zero; replace them with 0.5 so
    # logs stay finite without branching.
    return np.where(mask, px, 0.5), np.where(mask, pz, 0.5), mask


def mse_loss(px, pz, pair_mask=None) -> LossResult:
    """Sum of squared residuals (p_X - p_Z)^2."""
    px, pz, mask = _prepare(px, pz, pair_mask)
    r = px - pz
    value = float((r * r)[mask].sum())
    grad = np.where(mask, -2.0 * r, 0.0)
    return LossResult(value=value, grad_wrt_latent=grad, kind="mse")


def kl_loss(px, pz, pair_mask=None) -> LossResult:
    """Sum of p_X * log(p_X / p_Z); zero exactly when p_Z matches p_X."""
    px, pz, mask = _prepare(px, pz, pair_mask)
    value = float((px * (np.log(px) - np.log(pz)))[mask].sum())
    grad = np.where(mask, -px / pz, 0.0)
    return LossResult(value=value, grad_wrt_latent=grad, kind="kl")


def bce_loss(px, pz, pair_mask=None) -> LossResult:
    """Sum of -p_X log p_Z - (1 - p_X) log(1 - p_Z)."""
    px, pz, mask = _prepare(px, pz, pair_mask)
    value = float((-px * np.log(pz) - (1.0 - px) * np.log1p(-pz))[mask].sum())
    grad = np.where(mask, (pz - px) / (pz * (1.0 - pz)), 0.0)
    return LossResult(value=value, grad_wrt_latent=grad, kind="bce")


def gkl_loss(px, pz, gamma: float = 0.1, pair_mask=None) -> LossResult:
    """Sum of -p_X log p_Z + gamma * |p_X - p_Z|.

    The absolute term uses the subgradient sign(p_Z - p_X) with sign(0) = 0,
    so at p_Z = p_X the gradient is exactly -1 per kept pair.
    """
    if not np.isfinite(gamma) or gamma < 0:
        raise ValueError(f"gamma must be finite and >= 0, got {gamma}")
    px, pz, mask = _prepare(px, pz, pair_mask)
    value = float((-px * np.log(pz) + gamma * np.abs(px - pz))[mask].sum())
    grad = np.where(mask, -px / pz + gamma * np.sign(pz - px), 0.0)
    return LossResult(value=value, grad_wrt_latent=grad, kind="gkl", gamma=float(gamma))


def evaluate_loss(kind: str, px, pz, gamma: float = 0.1, pair_mask=None) -> LossResult:
    """Dispatch by loss name; gamma only affects "gkl"."""
    if kind == "mse":
        return mse_loss(px, pz, pair_mask)
    if kind == "kl":
        return kl_loss(px, pz, pair_mask)
    if kind == "bce":
        return bce_loss(px, pz, pair_mask)
    if kind == "gkl":
        return gkl_loss(px, pz, gamma=gamma, pair_mask=pair_mask)
    raise ValueError(f"unknown loss {kind!r}; expected one of {LOSS_KINDS}")
