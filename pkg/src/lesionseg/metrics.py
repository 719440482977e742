"""Segmentation accuracy metrics and corpus-level aggregation.

Overlap metrics (Dice, Jaccard, precision, recall) come from per-pixel
confusion counts. The Hausdorff distance is symmetric, computed over
boundary pixels (foreground pixels with at least one background 4-neighbor
or lying on the image edge) and scaled by the physical pixel spacing.
Empty-vs-empty Dice/Jaccard are defined as 1.0; precision, recall and
Hausdorff raise when their defining sets are empty. Aggregation reports the
arithmetic mean and the population standard deviation per metric, excluding
(and counting) undefined cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, UndefinedMetricError
from .model import BinaryMask, PixelSpacing

METRIC_NAMES = ("dsc", "ji", "hd_mm", "pr", "re")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class CaseMetrics:
    """Metric values for one case; None marks an undefined metric."""

    case_id: str
    dsc: float | None
    ji: float | None
    hd_mm: float | None
    pr: float | None
    re: float | None

    def value(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    n: int
    n_undefined: int


@dataclass(frozen=True)
class MetricReport:
    per_case: tuple[CaseMetrics, ...]
    summary: dict[str, MetricSummary]


def _check_shapes(pred: BinaryMask, truth: BinaryMask) -> None:
    if pred.bits.shape != truth.bits.shape:
        raise ShapeMismatchError(
            f"mask shapes differ: {pred.width}x{pred.height} vs "
            f"{truth.width}x{truth.height}"
        )


def confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    """Per-pixel true/false positive/negative counts."""
    _check_shapes(pred, truth)
    p, t = pred.bits, truth.bits
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
        tn=int(np.sum(~p & ~t)),
    )


def dice(pred: BinaryMask, truth: BinaryMask) -> float:
    """Dice similarity coefficient 2*tp / (2*tp + fp + fn); 1.0 when both masks are empty."""
    c = confusion(pred, truth)
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return 2.0 * c.tp / denom


def jaccard(pred: BinaryMask, truth: BinaryMask) -> float:
    """Jaccard index tp / (tp + fp + fn); 1.0 when both masks are empty."""
    c = confusion(pred, truth)
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return c.tp / denom


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """Coordinates (x, y) of foreground pixels that touch the background
    through a 4-neighbor or lie on the image edge."""
    bits = mask.bits
    padded = np.pad(bits, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    edge = np.zeros_like(bits)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    on_boundary = bits & (~interior | edge)
    ys, xs = np.nonzero(on_boundary)
    return np.column_stack([xs, ys])


def hausdorff(
    pred: BinaryMask, truth: BinaryMask, spacing: PixelSpacing = PixelSpacing()
) -> float:
    """Symmetric Hausdorff distance between mask boundaries, in millimeters."""
    _check_shapes(pred, truth)
    if pred.foreground_count == 0 or truth.foreground_count == 0:
        raise UndefinedMetricError("Hausdorff distance is undefined for an empty mask")
    a = boundary_pixels(pred).astype(np.float64)
    b = boundary_pixels(truth).astype(np.float64)
    scale = np.array([spacing.dx, spacing.dy])
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt(((diff * scale) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def precision_recall(pred: BinaryMask, truth: BinaryMask) -> tuple[float, float]:
    """(precision, recall); undefined when pred or truth is empty."""
    c = confusion(pred, truth)
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision is undefined for an empty prediction")
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall is undefined for an empty truth mask")
    return c.tp / (c.tp + c.fp), c.tp / (c.tp + c.fn)


def evaluate_pair(
    case_id: str,
    pred: BinaryMask,
    truth: BinaryMask,
    spacing: PixelSpacing = PixelSpacing(),
) -> CaseMetrics:
    """All five metrics for one mask pair, with undefined ones set to None."""
    c = confusion(pred, truth)
    dsc = dice(pred, truth)
    ji = jaccard(pred, truth)
    try:
        hd = hausdorff(pred, truth, spacing)
    except UndefinedMetricError:
        hd = None
    pr = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    re = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    return CaseMetrics(case_id=case_id, dsc=dsc, ji=ji, hd_mm=hd, pr=pr, re=re)


def aggregate(cases: list[CaseMetrics]) -> MetricReport:
    """Mean and population standard deviation per metric over the corpus."""
    if not cases:
        raise ValueError("cannot aggregate an empty list of cases")
    summary = {}
    for name in METRIC_NAMES:
        values = [c.value(name) for c in cases]
        defined = np.array([v for v in values if v is not None], dtype=np.float64)
        n_undefined = len(values) - defined.size
        if defined.size == 0:
            summary[name] = MetricSummary(float("nan"), float("nan"), 0, n_undefined)
        else:
            summary[name] = MetricSummary(
                mean=float(defined.mean()),
                std=float(defined.std()),  # population, divide by n
                n=int(defined.size),
                n_undefined=n_undefined,
            )
    return MetricReport(per_case=tuple(cases), summary=summary)


def format_mean_std(mean: float, std: float) -> str:
    """Render a summary cell like 0.786±0.172."""
    return f"{mean:.3f}±{std:.3f}"
