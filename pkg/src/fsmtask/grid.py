"""Reward grids: raster tiling, resampling, normalization, binning and
prediction-variance estimation.

Rasters are plain numpy arrays of shape ``(height, width)`` or
``(height, width, channels)`` with values in [0, 1]. Reward grids wrap a
2-D float array.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError, InputError

TILE_GRID = 33
TILE_SIZE = 12
UPSAMPLED_SIZE = 28


class DegenerateScaleWarning(UserWarning):
    """Raised (as a warning) when a constant grid is rescaled."""


def _check_raster(img) -> np.ndarray:
    arr = np.asarray(img, dtype=float)
    if arr.ndim not in (2, 3):
        raise DimensionError(f"raster must be 2-D or 3-D, got shape {arr.shape}")
    if arr.ndim == 3 and not 1 <= arr.shape[2] <= 4:
        raise DimensionError(f"raster must have 1-4 channels, got {arr.shape[2]}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"zero-sized raster {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise DomainError("raster values must be finite and within [0, 1]")
    return arr


def _sample_coords(n_in: int, n_out: int) -> np.ndarray:
    # corner-aligned: output 0 -> input 0, output n_out-1 -> input n_in-1
    if n_out == 1:
        return np.zeros(1)
    return np.arange(n_out) * (n_in - 1) / (n_out - 1)


def resize_bilinear(img, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resampling with corner-aligned sample positions.

    Keeps the dimensionality of the input (2-D in, 2-D out).
    """
    arr = _check_raster(img)
    if out_height < 1 or out_width < 1:
        raise DimensionError(f"output size must be >= 1, got {out_height}x{out_width}")
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w = arr.shape[:2]

    ys = _sample_coords(h, out_height)
    xs = _sample_coords(w, out_width)
    y0 = np.minimum(np.floor(ys).astype(int), h - 1)
    x0 = np.minimum(np.floor(xs).astype(int), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]

    top = arr[y0][:, x0] * (1.0 - wx) + arr[y0][:, x1] * wx
    bottom = arr[y1][:, x0] * (1.0 - wx) + arr[y1][:, x1] * wx
    out = np.clip(top * (1.0 - wy) + bottom * wy, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


def upsample_tile(tile, out_height: int = UPSAMPLED_SIZE, out_width: int = UPSAMPLED_SIZE) -> np.ndarray:
    return resize_bilinear(tile, out_height, out_width)


@dataclass(frozen=True)
class TileSet:
    grid_rows: int
    grid_cols: int
    tile_height: int
    tile_width: int
    tiles: list
    offset: tuple[int, int] = (0, 0)

    def __len__(self):
        return len(self.tiles)

    def tile(self, i: int, j: int) -> np.ndarray:
        return self.tiles[i * self.grid_cols + j]


def crop_offset(height: int, width: int, crop_height: int, crop_width: int) -> tuple[int, int]:
    """Top-left corner of a centered crop (floor of half the slack)."""
    return (height - crop_height) // 2, (width - crop_width) // 2


def tile_image(img, grid_rows: int = TILE_GRID, grid_cols: int = TILE_GRID,
               tile_height: int = TILE_SIZE, tile_width: int = TILE_SIZE) -> TileSet:
    """Cut a grid of non-overlapping tiles from the centered crop of ``img``.

    Tile ``(i, j)`` pixel ``(r, c)`` is input pixel
    ``(oy + i*tile_height + r, ox + j*tile_width + c)`` where ``(oy, ox)`` is
    :func:`crop_offset`. Tiles are returned row-major.
    """
    arr = _check_raster(img)
    if min(grid_rows, grid_cols, tile_height, tile_width) < 1:
        raise DimensionError("grid and tile dimensions must be >= 1")
    ch, cw = grid_rows * tile_height, grid_cols * tile_width
    h, w = arr.shape[:2]
    if ch > h or cw > w:
        raise DimensionError(f"{grid_rows}x{grid_cols} grid of {tile_height}x{tile_width} "
                             f"tiles needs {ch}x{cw} pixels, image is {h}x{w}")
    oy, ox = crop_offset(h, w, ch, cw)
    tiles = []
    for i in range(grid_rows):
        for j in range(grid_cols):
            y, x = oy + i * tile_height, ox + j * tile_width
            tiles.append(arr[y:y + tile_height, x:x + tile_width].copy())
    return TileSet(grid_rows, grid_cols, tile_height, tile_width, tiles, (oy, ox))


@dataclass(frozen=True)
class RewardGrid:
    """Dense matrix of per-tile food security values."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"reward grid must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("reward grid values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def value_min(self) -> float:
        return float(self.values.min())

    @property
    def value_max(self) -> float:
        return float(self.values.max())

    def __getitem__(self, pos) -> float:
        return float(self.values[pos[0], pos[1]])

    def __eq__(self, other):
        if not isinstance(other, RewardGrid):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class FsmBin:
    index: int
    lower: float
    upper: float


# (lower, upper) per bin; bin 0 is the singleton {0}, bin 1 is open (0, 0.1)
FSM_BIN_EDGES = [(0.0, 0.0), (0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, math.inf)]


def bin_fsm(value: float) -> FsmBin:
    """Classification bin of a stunting fraction.

    Bin 0 holds exactly 0; the remaining bins are lower-inclusive, so 0.1
    lands in bin 2 and 0.4 in bin 5.
    """
    v = float(value)
    if not math.isfinite(v) or v < 0.0:
        raise DomainError(f"FSM value must be finite and >= 0, got {value!r}")
    if v == 0.0:
        idx = 0
    else:
        idx = 1
        for k in range(2, len(FSM_BIN_EDGES)):
            if v >= FSM_BIN_EDGES[k][0]:
                idx = k
    lo, hi = FSM_BIN_EDGES[idx]
    return FsmBin(idx, lo, hi)


def scale_rewards(grid: RewardGrid, invert: bool = False) -> RewardGrid:
    """Affinely map grid values onto [0, 1]; ``invert`` flips to ``1 - x``.

    A constant grid cannot be stretched; it maps to 0.5 everywhere and a
    :class:`DegenerateScaleWarning` is emitted.
    """
    lo, hi = grid.value_min, grid.value_max
    if hi == lo:
        warnings.warn("constant reward grid; scaled values set to 0.5", DegenerateScaleWarning,
                      stacklevel=2)
        return RewardGrid(np.full(grid.shape, 0.5))
    out = (grid.values - lo) / (hi - lo)
    if invert:
        out = 1.0 - out
    return RewardGrid(np.clip(out, 0.0, 1.0))


@dataclass(frozen=True)
class PredictionSet:
    """Per-image tile predictions, ``images`` is a list of ``(image_id, values)``."""

    images: list

    def __post_init__(self):
        cleaned = []
        for image_id, preds in self.images:
            arr = np.asarray(preds, dtype=float).ravel()
            if not np.all(np.isfinite(arr)):
                raise InputError(f"image {image_id!r}: predictions must be finite")
            cleaned.append((str(image_id), arr))
        object.__setattr__(self, "images", cleaned)

    def __len__(self):
        return len(self.images)


def estimate_global_variance(preds: PredictionSet) -> float:
    """Mean over images of the unbiased (n - 1) variance of their tile predictions."""
    if len(preds) == 0:
        raise InputError("prediction set contains no images")
    variances = []
    for image_id, values in preds.images:
        if values.size < 2:
            raise InputError(f"image {image_id!r} has {values.size} tile prediction(s); need >= 2")
        variances.append(float(np.var(values, ddof=1)))
    return math.fsum(variances) / len(variances)


def save_grid(grid, path) -> None:
    """Write ``rows cols`` then one line of space-separated values per row."""
    values = grid.values if isinstance(grid, RewardGrid) else np.asarray(grid, dtype=float)
    lines = [f"{values.shape[0]} {values.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_grid(text: str, source: str = "<grid>") -> RewardGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{source}: empty grid file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError:
        raise InputError(f"{source}: first line must be 'rows cols'") from None
    body = lines[1:]
    if len(body) != rows:
        raise InputError(f"{source}: expected {rows} rows, found {len(body)}")
    data = []
    for k, ln in enumerate(body, start=2):
        try:
            row = [float(t) for t in ln.split()]
        except ValueError:
            raise InputError(f"{source}: line {k} has a non-numeric value") from None
        if len(row) != cols:
            raise InputError(f"{source}: line {k} has {len(row)} values, expected {cols}")
        data.append(row)
    try:
        return RewardGrid(np.array(data))
    except (DimensionError, DomainError) as exc:
        raise InputError(f"{source}: {exc}") from None


def load_grid(path) -> RewardGrid:
    path = Path(path)
    return parse_grid(path.read_text(encoding="utf-8"), str(path))


def load_predictions(path) -> PredictionSet:
    """Read ``image_id v1 v2 ... vT`` lines."""
    path = Path(path)
    images = []
    for k, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        parts = ln.split()
        if not parts:
            continue
        try:
            values = [float(t) for t in parts[1:]]
        except ValueError:
            raise InputError(f"{path}: line {k} has a non-numeric prediction") from None
        images.append((parts[0], values))
    return PredictionSet(images)


def save_predictions(preds: PredictionSet, path) -> None:
    lines = [" ".join([image_id] + [repr(float(v)) for v in values])
             for image_id, values in preds.images]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

