"""Marker-controlled watershed segmentation.

The pipeline has three stages:

1. Morphological gradient: pointwise difference between a dilation and an
   erosion by a square structuring element, with neighborhoods clipped at
   the image border (no padding values are invented).
2. Marker selection: the n brightest pixels become internal markers (ties
   broken in row-major order). Touching markers are merged into 8-connected
   components so each blob seeds one region; all border pixels not chosen
   as internal markers become the external (background) marker.
3. Priority flood: a priority queue is seeded with every marker pixel at its
   own gradient value. The lowest-priority pixel is popped (ties resolved by
   FIFO insertion order), and each still-unlabeled neighbor inherits its
   label and enters the queue at max(gradient(neighbor), popped priority).
   The max() keeps the popped priority sequence non-decreasing, and every
   pixel is labeled exactly once, so the result is a total partition with no
   explicit watershed-line label.

Neighbors are always visited in row-major offset order, which together with
the FIFO tie rule makes every stage deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MarkerConflictError
from .model import BinaryMask, GrayImage, LabelMap

DEFAULT_MARKER_COUNT = 45

_OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class StructuringElement:
    """Square structuring element of side 2*radius + 1."""

    radius: int = 1
    shape: str = "square"

    def __post_init__(self):
        if self.shape != "square":
            raise ConfigError(f"unsupported structuring element shape '{self.shape}'")
        if self.radius < 1:
            raise ConfigError("structuring element radius must be at least 1")


@dataclass(frozen=True)
class MarkerSet:
    """Internal markers as (x, y, label) with labels 1..m, and external
    background marker pixels as (x, y) carrying label 0."""

    internal: tuple[tuple[int, int, int], ...]
    external: frozenset[tuple[int, int]]

    def __post_init__(self):
        if not self.internal or not self.external:
            raise ValueError("need at least one internal and one external marker")
        internal_px = {(x, y) for x, y, _ in self.internal}
        if len(internal_px) != len(self.internal):
            raise ValueError("internal marker pixels must be unique")
        if internal_px & self.external:
            raise ValueError("internal and external markers must be disjoint")
        labels = sorted({label for _, _, label in self.internal})
        if labels[0] < 1 or labels != list(range(1, labels[-1] + 1)):
            raise ValueError("internal marker labels must be consecutive from 1")

    @property
    def region_count(self) -> int:
        return max(label for _, _, label in self.internal) + 1


def _window_extreme(arr: np.ndarray, radius: int, take_max: bool) -> np.ndarray:
    fill = -np.inf if take_max else np.inf
    padded = np.pad(arr, radius, constant_values=fill)
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (2 * radius + 1, 2 * radius + 1)
    )
    return windows.max(axis=(2, 3)) if take_max else windows.min(axis=(2, 3))


def morphological_gradient(
    img: GrayImage, se: StructuringElement = StructuringElement()
) -> GrayImage:
    """Dilation minus erosion; zero exactly where the neighborhood is constant."""
    dilated = _window_extreme(img.pixels, se.radius, take_max=True)
    eroded = _window_extreme(img.pixels, se.radius, take_max=False)
    return GrayImage(dilated - eroded)


def _border_pixels(width: int, height: int) -> list[tuple[int, int]]:
    border = []
    for y in range(height):
        for x in range(width):
            if x == 0 or y == 0 or x == width - 1 or y == height - 1:
                border.append((x, y))
    return border


def _merge_components(pixels: list[tuple[int, int]]) -> list[tuple[int, int, int]]:
    # Label 8-connected components in row-major discovery order.
    member = set(pixels)
    ordered = sorted(pixels, key=lambda p: (p[1], p[0]))
    labeled: dict[tuple[int, int], int] = {}
    next_label = 1
    for start in ordered:
        if start in labeled:
            continue
        stack = [start]
        labeled[start] = next_label
        while stack:
            x, y = stack.pop()
            for dy, dx in _OFFSETS_8:
                q = (x + dx, y + dy)
                if q in member and q not in labeled:
                    labeled[q] = next_label
                    stack.append(q)
        next_label += 1
    return [(x, y, labeled[(x, y)]) for x, y in ordered]


def select_markers(img: GrayImage, n: int, merge: bool = True) -> MarkerSet:
    """Choose the n brightest pixels as internal markers.

    With ``merge`` (the default), touching marker pixels share one label per
    8-connected component; otherwise each seed keeps its own label in
    selection order. The external marker is every border pixel not selected
    as internal.
    """
    w, h = img.width, img.height
    perimeter = w * h - max(w - 2, 0) * max(h - 2, 0)
    limit = w * h - perimeter
    if not 1 <= n <= limit:
        raise ConfigError(
            f"marker count {n} out of range [1, {limit}] for a {w}x{h} image"
        )
    flat = img.pixels.ravel()
    order = np.argsort(-flat, kind="stable")[:n]
    chosen = [(int(i % w), int(i // w)) for i in order]
    if merge:
        internal = _merge_components(chosen)
    else:
        internal = [(x, y, rank + 1) for rank, (x, y) in enumerate(chosen)]
    chosen_set = {(x, y) for x, y, _ in internal}
    external = frozenset(p for p in _border_pixels(w, h) if p not in chosen_set)
    if not external:
        raise MarkerConflictError(
            "internal markers cover the entire border; no room for background seeds"
        )
    return MarkerSet(internal=tuple(internal), external=external)


def watershed_flood(
    gradient: GrayImage,
    markers: MarkerSet,
    connectivity: int = 8,
    pop_trace: list | None = None,
) -> LabelMap:
    """Priority-flood the gradient from the marker pixels.

    Marker pixels keep their seeded labels and every pixel ends up labeled,
    so the output is a total partition. ``pop_trace``, when given, collects
    the popped priorities (useful to check the monotone-flood property).
    """
    if connectivity not in (4, 8):
        raise ConfigError("connectivity must be 4 or 8")
    offsets = _OFFSETS_4 if connectivity == 4 else _OFFSETS_8
    g = gradient.pixels
    h, w = g.shape
    label = np.full((h, w), -1, dtype=np.int64)
    for x, y in markers.external:
        if not (0 <= x < w and 0 <= y < h):
            raise ConfigError(f"marker ({x}, {y}) outside {w}x{h} gradient")
        label[y, x] = 0
    for x, y, region in markers.internal:
        if not (0 <= x < w and 0 <= y < h):
            raise ConfigError(f"marker ({x}, {y}) outside {w}x{h} gradient")
        label[y, x] = region

    heap: list[tuple[float, int, int, int]] = []
    counter = 0
    for y in range(h):
        for x in range(w):
            if label[y, x] >= 0:
                heapq.heappush(heap, (float(g[y, x]), counter, x, y))
                counter += 1
    while heap:
        priority, _, x, y = heapq.heappop(heap)
        if pop_trace is not None:
            pop_trace.append(priority)
        region = label[y, x]
        for dy, dx in offsets:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and label[ny, nx] < 0:
                label[ny, nx] = region
                heapq.heappush(heap, (max(float(g[ny, nx]), priority), counter, nx, ny))
                counter += 1
    return LabelMap(label, markers.region_count)


def mcwt_segment(
    img: GrayImage,
    n_markers: int = DEFAULT_MARKER_COUNT,
    se: StructuringElement = StructuringElement(),
    connectivity: int = 8,
    merge_markers: bool = True,
) -> BinaryMask:
    """Full marker-controlled watershed: gradient, markers, flood, union.

    Foreground is the union of all internal-marker regions; the external
    region is background.
    """
    gradient = morphological_gradient(img, se)
    markers = select_markers(img, n_markers, merge=merge_markers)
    labels = watershed_flood(gradient, markers, connectivity)
    return BinaryMask(labels.labels >= 1)
