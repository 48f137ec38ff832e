"""Matplotlib figures written next to the text outputs of each run."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# PNG metadata would otherwise carry the matplotlib version string
_SAVE_KW = dict(dpi=100, metadata={"Software": None})


def _draw_path(ax, positions, **kw):
    if positions:
        rows = [p[0] for p in positions]
        cols = [p[1] for p in positions]
        ax.plot(cols, rows, **kw)
        ax.plot(cols[0], rows[0], "o", color=kw.get("color", "c"), ms=6)
        ax.plot(cols[-1], rows[-1], "*", color=kw.get("color", "c"), ms=10)


def plot_matrix(matrix, out_file, path=None, title=None, cmap="hot", label=None, overlay=None):
    """Heatmap of ``matrix`` with an optional path and a second comparison path.

    ``overlay`` is a sequence of positions drawn dashed (e.g. the clear-sky
    UCS route against a cloud-aware trajectory).
    """
    m = np.asarray(getattr(matrix, "values", matrix), dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(m, cmap=cmap, interpolation="nearest")
    cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    if label:
        cb.set_label(label)
    if overlay is not None:
        _draw_path(ax, list(overlay), color="tab:blue", lw=1.5, ls="--")
    if path is not None:
        _draw_path(ax, list(getattr(path, "positions", path)), color="c", lw=2)
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_file, **_SAVE_KW)
    plt.close(fig)
    return Path(out_file)


def plot_clouds_over_grid(grid, mask, out_file, path=None, overlay=None, title=None):
    """Scaled reward grid with cloudy tiles greyed out, the occluded view."""
    m = np.asarray(getattr(grid, "values", grid), dtype=float)
    shown = np.ma.masked_array(m, mask=np.asarray(mask, dtype=bool))
    cmap = plt.get_cmap("hot").copy()
    cmap.set_bad("0.75")
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(shown, cmap=cmap, interpolation="nearest", vmin=m.min(), vmax=m.max())
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    if overlay is not None:
        _draw_path(ax, list(overlay), color="tab:blue", lw=1.5, ls="--")
    if path is not None:
        _draw_path(ax, list(getattr(path, "positions", path)), color="c", lw=2)
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_file, **_SAVE_KW)
    plt.close(fig)
    return Path(out_file)


def plot_residuals(residuals, out_file, gamma=None):
    r = np.asarray(residuals, dtype=float)
    k = np.arange(1, len(r) + 1)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(k, r, label="sup-norm residual")
    if gamma is not None and len(r):
        ax.semilogy(k, r[0] * gamma ** (k - 1), "--", label=r"$\gamma^k$ envelope")
    ax.set_xlabel("sweep")
    ax.set_ylabel("residual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_file, **_SAVE_KW)
    plt.close(fig)
    return Path(out_file)
