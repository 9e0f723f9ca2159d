"""Quality heatmaps of ground-truth metrics over two-feature explanations."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core import ConfigError
from ..groundtruth import ground_truth_metric
from ..reports import write_csv

REGION_METRICS = ("fa", "ra", "sa", "sra", "pra")


def grid_axis(resolution: int) -> np.ndarray:
    """Cell centres of a ``resolution``-cell partition of (-1, 1)."""
    if resolution < 1:
        raise ConfigError("grid_resolution must be >= 1")
    h = 2.0 / resolution
    return -1.0 + h * (np.arange(resolution) + 0.5)


def run_region_heatmaps(beta=(0.7, 0.3), grid_resolution: int = 100, n: int = 2,
                        metrics=REGION_METRICS) -> dict[str, np.ndarray]:
    """Metric value for every explanation ``(i1, i2)`` on the grid against ``e* = beta``.

    Returns ``{metric: grid}`` with ``grid[a, b]`` the value at ``i1 = axis[a]``,
    ``i2 = axis[b]``.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (2,):
        raise ConfigError("beta must hold two coefficients")
    axis = grid_axis(grid_resolution)
    out = {}
    for metric in metrics:
        grid = np.empty((axis.size, axis.size))
        for a, i1 in enumerate(axis):
            for b, i2 in enumerate(axis):
                grid[a, b] = ground_truth_metric(metric, (i1, i2), beta, n if metric != "pra" else None)
        out[metric] = grid
    return out


def write_region_heatmaps(grids: dict[str, np.ndarray], out_dir) -> list[Path]:
    paths = []
    for metric, grid in grids.items():
        axis = grid_axis(grid.shape[0])
        rows = ((axis[a], axis[b], grid[a, b]) for a in range(axis.size) for b in range(axis.size))
        paths.append(write_csv(Path(out_dir) / f"fig3_{metric}.csv", ("i1", "i2", "q"), rows))
    return paths
