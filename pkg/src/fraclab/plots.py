"""Static figures: SVG line plots and PNG heatmaps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def line_plot(path: Path, x, curves: dict, xlabel: str = "x", ylabel: str = "", title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in curves.items():
        ax.plot(x, y, label=label, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format=Path(path).suffix.lstrip(".") or "svg")
    plt.close(fig)
    return Path(path)


def heatmap(path: Path, x, y, Z, xlabel: str = "x", ylabel: str = "t", title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    lim = float(np.max(np.abs(Z))) or 1.0
    mesh = ax.pcolormesh(x, y, Z, shading="auto", cmap="RdBu_r", vmin=-lim, vmax=lim)
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
