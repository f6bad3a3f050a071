"""Minimal dependency-free SVG scatter plots for 2-D embeddings."""

from __future__ import annotations

import numpy as np

__all__ = ["PALETTE", "render_scatter_svg"]

# 20 visually distinct fills; label c uses PALETTE[c % 20].
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)

_SIZE = 800.0
_RADIUS = 3.0


def render_scatter_svg(z: np.ndarray, labels=None, path=None) -> str:
    """Scatter plot of a 2-D embedding; returns the SVG text, optionally saved.

    The viewport covers the data range plus a 5% margin per side; points are
    fixed-radius circles colored by label through a 20-color palette (one
    color when labels are absent). Output bytes are deterministic.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ValueError(f"scatter plots need an (n, 2) embedding, got shape {z.shape}")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != z.shape[0]:
            raise ValueError("labels length does not match the embedding")

    if z.shape[0]:
        lo = z.min(axis=0)
        hi = z.max(axis=0)
    else:
        lo = np.zeros(2)
        hi = np.zeros(2)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)  # degenerate ranges still get a viewport
    lo = lo - 0.05 * span
    span = 1.1 * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE:g}" height="{_SIZE:g}" '
        f'viewBox="0 0 {_SIZE:g} {_SIZE:g}">',
        f'<rect width="{_SIZE:g}" height="{_SIZE:g}" fill="white"/>',
    ]
    for i in range(z.shape[0]):
        px = (z[i, 0] - lo[0]) / span[0] * _SIZE
        py = _SIZE - (z[i, 1] - lo[1]) / span[1] * _SIZE  # SVG y grows downward
        color = PALETTE[0] if labels is None else PALETTE[int(labels[i]) % len(PALETTE)]
        parts.append(f'<circle cx="{px:.3f}" cy="{py:.3f}" r="{_RADIUS:g}" fill="{color}"/>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
