"""Contrast-limited adaptive histogram equalization (CLAHE).

The image is divided into a grid of tiles. Each tile gets its own intensity
histogram, clipped at ``clip_limit`` times the tile pixel count with the
clipped excess redistributed uniformly over all bins in a single pass, and
turned into an equalization lookup table mapping onto the full [0, 1] range:

    lut[b] = cumulative_count_through_bin(b) / tile_pixel_count

A clip limit of 1.0 therefore disables clipping (no bin can exceed the tile
population) and a single 1x1 tile reduces to plain global histogram
equalization. Each output pixel bilinearly interpolates the lookup tables of
the four surrounding tile centers; pixels beyond the outermost centers use
the nearest available tiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import GrayImage


@dataclass(frozen=True)
class ClaheConfig:
    tiles_x: int = 8
    tiles_y: int = 8
    clip_limit: float = 0.01
    bins: int = 256

    def __post_init__(self):
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise ConfigError("tile grid counts must be at least 1")
        if not 0.0 < self.clip_limit <= 1.0:
            raise ConfigError("clip_limit must lie in (0, 1]")
        if self.bins < 2:
            raise ConfigError("bins must be at least 2")


def _tile_edges(extent: int, tiles: int) -> np.ndarray:
    return (np.arange(tiles + 1) * extent) // tiles


def _clipped_lut(bin_counts: np.ndarray, clip_limit: float, n_pixels: int) -> np.ndarray:
    hist = bin_counts.astype(np.float64)
    clip = clip_limit * n_pixels
    excess = np.maximum(hist - clip, 0.0).sum()
    hist = np.minimum(hist, clip) + excess / hist.size
    return np.cumsum(hist) / n_pixels


def _axis_interp(coords: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # For each coordinate: indices of the two bracketing tile centers and the
    # blend weight of the right one, clamped at the borders.
    idx = np.searchsorted(centers, coords, side="right") - 1
    left = np.clip(idx, 0, len(centers) - 1)
    right = np.clip(idx + 1, 0, len(centers) - 1)
    span = centers[right] - centers[left]
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(span > 0, (coords - centers[left]) / np.where(span > 0, span, 1.0), 0.0)
    return left, right, np.clip(weight, 0.0, 1.0)


def clahe(img: GrayImage, cfg: ClaheConfig = ClaheConfig()) -> GrayImage:
    """Apply CLAHE; output intensities stay in [0, 1]."""
    h, w = img.pixels.shape
    if cfg.tiles_x > w or cfg.tiles_y > h:
        raise ConfigError(
            f"tile grid {cfg.tiles_x}x{cfg.tiles_y} exceeds image {w}x{h}"
        )
    bin_idx = np.minimum((img.pixels * cfg.bins).astype(np.int64), cfg.bins - 1)

    xs = _tile_edges(w, cfg.tiles_x)
    ys = _tile_edges(h, cfg.tiles_y)
    luts = np.empty((cfg.tiles_y, cfg.tiles_x, cfg.bins))
    centers_x = np.empty(cfg.tiles_x)
    centers_y = np.empty(cfg.tiles_y)
    for ty in range(cfg.tiles_y):
        for tx in range(cfg.tiles_x):
            tile = bin_idx[ys[ty] : ys[ty + 1], xs[tx] : xs[tx + 1]]
            counts = np.bincount(tile.ravel(), minlength=cfg.bins)
            luts[ty, tx] = _clipped_lut(counts, cfg.clip_limit, tile.size)
    centers_x[:] = (xs[:-1] + xs[1:] - 1) / 2.0
    centers_y[:] = (ys[:-1] + ys[1:] - 1) / 2.0

    lx, rx, wx = _axis_interp(np.arange(w, dtype=np.float64), centers_x)
    ly, ry, wy = _axis_interp(np.arange(h, dtype=np.float64), centers_y)
    ly, ry = ly[:, None], ry[:, None]
    wy = wy[:, None]

    top = (1.0 - wx) * luts[ly, lx[None, :], bin_idx] + wx * luts[ly, rx[None, :], bin_idx]
    bottom = (1.0 - wx) * luts[ry, lx[None, :], bin_idx] + wx * luts[ry, rx[None, :], bin_idx]
    out = (1.0 - wy) * top + wy * bottom
    return GrayImage(np.clip(out, 0.0, 1.0))
