"""End-to-end segmentation runs shared by the command-line front end.

A run optionally crops to a ROI, optionally applies CLAHE (to the crop by
default, or to the full image before cropping), segments with one of the
three methods, and embeds the result back into a full-size mask so that
predictions always share the input image's shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gmm import gmm_segment
from .kmeans import KmeansConfig, kmeans_cluster
from .model import BinaryMask, GrayImage, RegionOfInterest, crop_roi, select_lesion_cluster
from .preprocess import ClaheConfig, clahe
from .watershed import DEFAULT_MARKER_COUNT, StructuringElement, mcwt_segment

METHODS = ("kmeans", "gmm", "mcwt")

_METHOD_DEFAULTS = {
    "kmeans": {"max_iter": 100, "tol": 1e-6},
    "gmm": {"max_iter": 200, "tol": 1e-7},
}


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "mcwt"
    k: int = 2
    max_iter: int | None = None
    tol: float | None = None
    seed: int = 0
    markers: int = DEFAULT_MARKER_COUNT
    se_radius: int = 1
    merge_markers: bool = True
    pooled_variance: bool = False
    clahe: ClaheConfig | None = ClaheConfig()
    clahe_full_image: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method '{self.method}' (expected one of {', '.join(METHODS)})"
            )
        if self.method in _METHOD_DEFAULTS:
            defaults = _METHOD_DEFAULTS[self.method]
            if self.max_iter is None:
                object.__setattr__(self, "max_iter", defaults["max_iter"])
            if self.tol is None:
                object.__setattr__(self, "tol", defaults["tol"])
        # Validate eagerly so config errors surface before any computation.
        if self.method in ("kmeans", "gmm"):
            if self.k < 1:
                raise ConfigError("k must be at least 1")
            if self.max_iter < 1:
                raise ConfigError("max_iter must be at least 1")
            if not (np.isfinite(self.tol) and self.tol >= 0):
                raise ConfigError("tol must be a non-negative number")
        else:
            StructuringElement(radius=self.se_radius)
            if self.markers < 1:
                raise ConfigError("marker count must be at least 1")

    def describe(self) -> dict:
        """Parameter record for run manifests."""
        params: dict = {"method": self.method}
        if self.method == "kmeans":
            params.update(k=self.k, max_iter=self.max_iter, tol=self.tol)
        elif self.method == "gmm":
            params.update(
                k=self.k,
                max_iter=self.max_iter,
                tol=self.tol,
                seed=self.seed,
                pooled_variance=self.pooled_variance,
            )
        else:
            params.update(
                markers=self.markers,
                se_radius=self.se_radius,
                merge_markers=self.merge_markers,
            )
        if self.clahe is None:
            params["clahe"] = None
        else:
            params["clahe"] = {
                "tiles_x": self.clahe.tiles_x,
                "tiles_y": self.clahe.tiles_y,
                "clip_limit": self.clahe.clip_limit,
                "bins": self.clahe.bins,
                "full_image": self.clahe_full_image,
            }
        return params


def _segment_window(window: GrayImage, cfg: PipelineConfig) -> BinaryMask:
    if cfg.method == "kmeans":
        result = kmeans_cluster(window, KmeansConfig(cfg.k, cfg.max_iter, cfg.tol))
        return select_lesion_cluster(result.labels, window)
    if cfg.method == "gmm":
        result = gmm_segment(
            window,
            k=cfg.k,
            max_iter=cfg.max_iter,
            tol=cfg.tol,
            seed=cfg.seed,
            pooled_variance=cfg.pooled_variance,
        )
        return select_lesion_cluster(result.labels, window)
    return mcwt_segment(
        window,
        n_markers=cfg.markers,
        se=StructuringElement(radius=cfg.se_radius),
        merge_markers=cfg.merge_markers,
    )


def run_segmentation(
    image: GrayImage, cfg: PipelineConfig, roi: RegionOfInterest | None = None
) -> BinaryMask:
    """Segment an image and return a full-size mask (background outside the ROI)."""
    if roi is not None and cfg.clahe_full_image and cfg.clahe is not None:
        window = crop_roi(clahe(image, cfg.clahe), roi)
    else:
        window = crop_roi(image, roi) if roi is not None else image
        if cfg.clahe is not None:
            window = clahe(window, cfg.clahe)
    window_mask = _segment_window(window, cfg)
    if roi is None:
        return window_mask
    full = np.zeros((image.height, image.width), dtype=bool)
    full[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w] = window_mask.bits
    return BinaryMask(full)
