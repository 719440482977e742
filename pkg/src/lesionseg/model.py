"""Core raster types and the operations shared by every segmentation method.

Pixel layout is row-major everywhere: pixel (i, j) means column i of row j
and lives at ``array[j, i]``. All types are immutable after construction and
therefore safe to share across threads; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ShapeMismatchError


def _validated_2d(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("expected a non-empty 2D array")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster with intensities normalized to [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _validated_2d(self.pixels, np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("pixel values must be finite")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster: True is foreground, False is background."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype != np.bool_:
            raise ValueError("mask bits must be boolean")
        object.__setattr__(self, "bits", _validated_2d(arr, np.bool_))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Integer raster assigning each pixel one of k labels.

    Labels are consecutive: every value lies in [0, k) and every label in
    that range occurs at least once.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self):
        arr = _validated_2d(self.labels, np.int64)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if arr.min() < 0 or arr.max() >= self.k:
            raise ValueError("labels must lie in [0, k)")
        counts = np.bincount(arr.ravel(), minlength=self.k)
        if (counts == 0).any():
            missing = int(np.flatnonzero(counts == 0)[0])
            raise ValueError(f"label {missing} does not occur")
        object.__setattr__(self, "labels", arr)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class RegionOfInterest:
    """Rectangular crop window; (x, y) is the top-left corner in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("ROI corner must be non-negative")
        if self.w < 1 or self.h < 1:
            raise ValueError("ROI extent must be at least 1x1")


@dataclass(frozen=True)
class PixelSpacing:
    """Physical pixel size in millimeters along x (columns) and y (rows)."""

    dx: float = 1.0
    dy: float = 1.0

    def __post_init__(self):
        for v in (self.dx, self.dy):
            if not (np.isfinite(v) and v > 0):
                raise ValueError("pixel spacing must be finite and positive")


def crop_roi(img: GrayImage, roi: RegionOfInterest) -> GrayImage:
    """Extract the ROI window; output pixel (i, j) is input (roi.x+i, roi.y+j)."""
    if roi.x + roi.w > img.width or roi.y + roi.h > img.height:
        raise BoundsError(
            f"ROI {roi.w}x{roi.h}+{roi.x}+{roi.y} exceeds image "
            f"{img.width}x{img.height}"
        )
    return GrayImage(img.pixels[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w])


def select_lesion_cluster(labels: LabelMap, img: GrayImage) -> BinaryMask:
    """Pick the label with the highest mean intensity as foreground.

    Ties go to the lower label index, so the result is deterministic and
    invariant under any permutation that preserves per-label pixel sets.
    """
    if labels.labels.shape != img.pixels.shape:
        raise ShapeMismatchError(
            f"label map {labels.width}x{labels.height} does not match image "
            f"{img.width}x{img.height}"
        )
    flat = labels.labels.ravel()
    sums = np.bincount(flat, weights=img.pixels.ravel(), minlength=labels.k)
    counts = np.bincount(flat, minlength=labels.k)
    means = sums / counts
    brightest = int(np.argmax(means))
    return BinaryMask(labels.labels == brightest)
