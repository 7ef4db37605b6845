"""Rendering of grid reports: a CSV of per-cell diagnostics and a matplotlib
contact-sheet montage laid out like the square/triangle interpolation figures.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["write_grid_csv", "render_montage"]


def write_grid_csv(path, rows: list[dict]) -> None:
    """One row per grid cell: index, weights, and numeric diagnostics."""
    if not rows:
        raise ValueError("no rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _grid_positions(corner_count: int, resolution: int) -> list[tuple[int, int]]:
    """(row, col) montage slots matching pipeline.weight_grid ordering."""
    if corner_count == 2:
        return [(0, i) for i in range(resolution)]
    if corner_count == 3:
        return [(i, j) for i in range(resolution) for j in range(resolution - i)]
    if corner_count == 4:
        return [(i, j) for i in range(resolution) for j in range(resolution)]
    raise ValueError(f"unsupported corner count {corner_count}")


def render_montage(
    path,
    images: list[np.ndarray],
    weights: list[np.ndarray],
    corner_count: int,
    resolution: int,
    title: str | None = None,
) -> None:
    """Contact sheet of the grid cells, annotated with their weights."""
    positions = _grid_positions(corner_count, resolution)
    if len(images) != len(positions):
        raise ValueError(f"{len(images)} images for {len(positions)} grid slots")
    n_rows = 1 if corner_count == 2 else resolution
    n_cols = resolution
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(2.0 * n_cols, 2.0 * n_rows), squeeze=False
    )
    for ax in axes.flat:
        ax.set_axis_off()
    for (row, col), img, w in zip(positions, images, weights):
        ax = axes[row][col]
        ax.imshow(np.clip(img, 0.0, 1.0))
        ax.set_title("(" + ", ".join(f"{v:.2f}" for v in w) + ")", fontsize=6)
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
