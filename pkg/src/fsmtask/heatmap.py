"""Binary PPM (P6) heatmaps of reward and probability matrices.

Values are mapped linearly onto a 256-entry "hot" ramp: black -> red ->
yellow -> white, with the matrix minimum at index 0 and the maximum at
index 255 (a constant matrix maps entirely to index 0). Path cells are
overdrawn in cyan, a colour the ramp never produces.
"""

from pathlib import Path

import numpy as np

from .grid import RewardGrid

PATH_COLOR = (0, 255, 255)


def _build_ramp() -> np.ndarray:
    anchors = np.array([[0, 0, 0], [255, 0, 0], [255, 255, 0], [255, 255, 255]], dtype=float)
    t = np.linspace(0.0, 3.0, 256)
    k = np.minimum(t.astype(int), 2)
    frac = (t - k)[:, None]
    return np.rint(anchors[k] * (1 - frac) + anchors[k + 1] * frac).astype(np.uint8)


RAMP = _build_ramp()


def ramp_indices(matrix, vmin=None, vmax=None) -> np.ndarray:
    m = np.asarray(matrix.values if isinstance(matrix, RewardGrid) else matrix, dtype=float)
    lo = m.min() if vmin is None else vmin
    hi = m.max() if vmax is None else vmax
    if hi <= lo:
        return np.zeros(m.shape, dtype=np.int64)
    x = np.clip((m - lo) / (hi - lo), 0.0, 1.0)
    return np.floor(x * 255 + 0.5).astype(np.int64)


def heatmap_pixels(matrix, path=None, cell: int = 1, vmin=None, vmax=None) -> np.ndarray:
    """RGB array of shape ``(rows*cell, cols*cell, 3)``."""
    img = RAMP[ramp_indices(matrix, vmin, vmax)]
    if path is not None:
        positions = path.positions if hasattr(path, "positions") else path
        for r, c in positions:
            img[r, c] = PATH_COLOR
    if cell > 1:
        img = np.repeat(np.repeat(img, cell, axis=0), cell, axis=1)
    return img


def encode_ppm(pixels: np.ndarray) -> bytes:
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse a P6 image written by :func:`encode_ppm` (no comments)."""
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("not an 8-bit P6 image")
    w, h = int(fields[1]), int(fields[2])
    body = data[pos + 1:pos + 1 + w * h * 3]
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def render_heatmap(matrix, out_file, path=None, cell: int = 1, vmin=None, vmax=None) -> Path:
    out_file = Path(out_file)
    out_file.write_bytes(encode_ppm(heatmap_pixels(matrix, path, cell, vmin, vmax)))
    return out_file
