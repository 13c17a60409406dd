"""Scatter plots of 2-d reduced embeddings, written as deterministic SVG.

Matplotlib embeds a creation date and randomizes internal ids by default;
both are pinned here so identical inputs produce byte-identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ShapeMismatch  # noqa: E402

__all__ = ["scatter_svg"]


def scatter_svg(
    points: np.ndarray,
    values: np.ndarray,
    path: str | Path,
    title: str,
    value_label: str,
    categorical: bool = False,
) -> None:
    """2-d scatter colored by a per-point value.

    Continuous values get a colorbar; categorical values (cluster ids,
    location indices) get one legend entry per category.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ShapeMismatch(f"expected (n, 2) points, got {points.shape}")
    values = np.asarray(values)
    if values.shape[0] != points.shape[0]:
        raise ShapeMismatch("points and color values must align")

    with plt.rc_context({"svg.hashsalt": "fixed"}):
        fig, ax = plt.subplots(figsize=(6.0, 5.0), dpi=100)
        if categorical:
            categories = sorted(set(values.tolist()))
            cmap = plt.get_cmap("tab20" if len(categories) > 10 else "tab10")
            for idx, cat in enumerate(categories):
                mask = values == cat
                ax.scatter(
                    points[mask, 0],
                    points[mask, 1],
                    s=14,
                    color=cmap(idx % cmap.N),
                    label=str(cat),
                )
            ax.legend(title=value_label, fontsize=8, title_fontsize=8, loc="best")
        else:
            sc = ax.scatter(points[:, 0], points[:, 1], s=14, c=values.astype(np.float64),
                            cmap="viridis")
            fig.colorbar(sc, ax=ax, label=value_label)
        ax.set_xlabel("component 1")
        ax.set_ylabel("component 2")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
