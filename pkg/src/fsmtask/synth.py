"""Seeded synthetic reward grids for exercising the pipeline without survey data."""

import numpy as np

from ._rng import make_rng
from .errors import DomainError
from .grid import RewardGrid

PATTERNS = ("gradient", "blobs", "checker")


def synth_grid(rows: int, cols: int, pattern: str = "blobs", seed: int = 0, n_blobs: int = 5) -> RewardGrid:
    """Build a ``rows x cols`` grid.

    gradient: row-major linear ramp ``k / (rows*cols - 1)`` over flat index ``k``.
    checker: ``(r + c) % 2``.
    blobs: sum of ``n_blobs`` Gaussian bumps with seeded centres, widths and
    amplitudes, rescaled onto [0, 1].
    """
    if rows < 1 or cols < 1:
        raise DomainError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    if pattern == "gradient":
        n = rows * cols
        k = np.arange(n, dtype=float)
        values = (k / (n - 1) if n > 1 else np.zeros(1)).reshape(rows, cols)
    elif pattern == "checker":
        r, c = np.indices((rows, cols))
        values = ((r + c) % 2).astype(float)
    elif pattern == "blobs":
        rng = make_rng(seed)
        r, c = np.indices((rows, cols), dtype=float)
        values = np.zeros((rows, cols))
        scale = max(rows, cols)
        for _ in range(n_blobs):
            cr, cc = rng.uniform(0, rows), rng.uniform(0, cols)
            width = rng.uniform(0.08, 0.25) * scale
            amp = rng.uniform(0.5, 1.0)
            values += amp * np.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2 * width ** 2))
        lo, hi = values.min(), values.max()
        values = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    else:
        raise DomainError(f"unknown pattern {pattern!r}; choose from {', '.join(PATTERNS)}")
    return RewardGrid(values)


def synth_raster(height: int, width: int, channels: int = 3, seed: int = 0) -> np.ndarray:
    """Uniform random raster in [0, 1), shape ``(height, width, channels)``."""
    return make_rng(seed).random((height, width, channels))
