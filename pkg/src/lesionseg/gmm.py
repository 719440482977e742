"""Gaussian-mixture segmentation of pixel intensities, fitted with EM.

Intensities are scalar, so each component is a 1D Gaussian with mean m,
variance v and mixture weight w:

    pdf(x) = (2*pi*v)**-0.5 * exp(-(x - m)**2 / (2*v))

The E-step evaluates responsibilities in log space for stability; the M-step
recomputes means, variances (floored at VARIANCE_FLOOR to keep components
non-singular on constant regions) and weights from the responsibilities.
EM never decreases the data log-likelihood while the floor is inactive.
Everything is deterministic for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kmeans import KmeansConfig, kmeans_cluster
from .model import GrayImage, LabelMap

VARIANCE_FLOOR = 1e-6
_COLLAPSE_EPS = 1e-12
_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GmmParams:
    """Per-component means, variances and mixture weights."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (means.ndim == variances.ndim == weights.ndim == 1):
            raise ValueError("parameters must be 1D arrays")
        if not (means.size == variances.size == weights.size >= 1):
            raise ValueError("parameter arrays must share a length of at least 1")
        if not (np.isfinite(means).all() and np.isfinite(variances).all() and np.isfinite(weights).all()):
            raise ValueError("parameters must be finite")
        if (variances < VARIANCE_FLOOR * (1 - 1e-9)).any():
            raise ValueError(f"variances must be at least {VARIANCE_FLOOR}")
        if (weights < 0).any() or abs(float(weights.sum()) - 1.0) > _ROW_SUM_TOL:
            raise ValueError("weights must be non-negative and sum to 1")
        for name, arr in (("means", means), ("variances", variances), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.means.size


@dataclass(frozen=True, eq=False)
class Posteriors:
    """Row-stochastic N x k matrix of component responsibilities."""

    resp: np.ndarray

    def __post_init__(self):
        resp = np.asarray(self.resp, dtype=np.float64)
        if resp.ndim != 2 or resp.size == 0:
            raise ValueError("responsibilities must form a non-empty 2D matrix")
        if resp.min() < -_ROW_SUM_TOL or resp.max() > 1 + _ROW_SUM_TOL:
            raise ValueError("responsibilities must lie in [0, 1]")
        if np.abs(resp.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
            raise ValueError("responsibility rows must sum to 1")
        resp.setflags(write=False)
        object.__setattr__(self, "resp", resp)


@dataclass(frozen=True, eq=False)
class GmmResult:
    """Per-pixel argmax labels, fitted parameters and the likelihood trace.

    ``ll_trace`` holds the log-likelihood of the initial parameters followed
    by the value after each EM iteration; it is non-decreasing (up to float
    noise) unless the variance floor or a collapse re-seed intervened.
    Labels are compacted to consecutive indices if some component wins no
    pixel, which keeps the LabelMap contract intact.
    """

    labels: LabelMap
    params: GmmParams
    ll_trace: np.ndarray

    def __post_init__(self):
        trace = np.asarray(self.ll_trace, dtype=np.float64)
        trace.setflags(write=False)
        object.__setattr__(self, "ll_trace", trace)


def gaussian_pdf(x: float, mean: float, var: float) -> float:
    """Density of a 1D Gaussian at x."""
    if var < VARIANCE_FLOOR * (1 - 1e-9):
        raise ConfigError(f"variance must be at least {VARIANCE_FLOOR}")
    return math.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _log_densities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    diff = x[:, None] - params.means[None, :]
    return -0.5 * np.log(2.0 * np.pi * params.variances)[None, :] - diff**2 / (
        2.0 * params.variances[None, :]
    )


def _weighted_log_densities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    return log_w[None, :] + _log_densities(x, params)


def e_step(img: GrayImage, params: GmmParams) -> Posteriors:
    """Posterior responsibility of each component for each pixel."""
    lw = _weighted_log_densities(img.pixels.ravel(), params)
    peak = lw.max(axis=1, keepdims=True)
    shifted = np.exp(lw - peak)
    return Posteriors(shifted / shifted.sum(axis=1, keepdims=True))


def m_step(img: GrayImage, post: Posteriors, pooled_variance: bool = False) -> GmmParams:
    """Update means, variances and weights from the responsibilities.

    A component whose total responsibility falls below 1e-12 has collapsed;
    it is re-seeded at the intensity of the least confidently explained
    pixel (smallest maximum responsibility), with the floored global
    variance and weight 1/N, after which weights are renormalized.

    With ``pooled_variance`` every component shares the single variance
    obtained by pooling the weighted squared deviations of all components.
    """
    x = img.pixels.ravel()
    resp = post.resp
    if resp.shape[0] != x.size:
        raise ValueError("responsibility rows must match the pixel count")
    n = x.size
    totals = resp.sum(axis=0)
    collapsed = totals < _COLLAPSE_EPS
    safe = np.where(collapsed, 1.0, totals)
    means = (resp * x[:, None]).sum(axis=0) / safe
    sq_dev = resp * (x[:, None] - means[None, :]) ** 2
    if pooled_variance:
        variances = np.full_like(means, sq_dev.sum() / n)
    else:
        variances = sq_dev.sum(axis=0) / safe
    variances = np.maximum(variances, VARIANCE_FLOOR)
    weights = totals / n

    if collapsed.any():
        order = np.argsort(resp.max(axis=1), kind="stable")
        fallback_var = max(float(x.var()), VARIANCE_FLOOR)
        for j, comp in enumerate(np.flatnonzero(collapsed)):
            means[comp] = x[order[j % n]]
            variances[comp] = fallback_var
            weights[comp] = 1.0 / n
        weights = weights / weights.sum()
    return GmmParams(means=means, variances=variances, weights=weights)


def log_likelihood(img: GrayImage, params: GmmParams) -> float:
    """Total data log-likelihood, evaluated with log-sum-exp."""
    lw = _weighted_log_densities(img.pixels.ravel(), params)
    peak = lw.max(axis=1)
    return float(np.sum(peak + np.log(np.exp(lw - peak[:, None]).sum(axis=1))))


def _initial_params(img: GrayImage, k: int) -> GmmParams:
    km = kmeans_cluster(img, KmeansConfig(k=k, max_iter=100, tol=1e-6))
    x = img.pixels.ravel()
    labels = km.labels.labels.ravel()
    counts = np.bincount(labels, minlength=k)
    dev = (x - km.centroids[labels]) ** 2
    variances = np.bincount(labels, weights=dev, minlength=k) / counts
    return GmmParams(
        means=km.centroids.copy(),
        variances=np.maximum(variances, VARIANCE_FLOOR),
        weights=counts / x.size,
    )


def gmm_segment(
    img: GrayImage,
    k: int = 2,
    max_iter: int = 200,
    tol: float = 1e-7,
    seed: int = 0,
    pooled_variance: bool = False,
) -> GmmResult:
    """Fit a k-component mixture with EM and label pixels by argmax posterior.

    Initialization comes from k-means (cluster means, floored within-cluster
    variances, cluster fractions as weights), so runs are deterministic.
    ``seed`` is accepted for manifest completeness; the collapse re-seed rule
    is itself deterministic. Iteration stops when the relative change of the
    log-likelihood drops to ``tol`` or after ``max_iter`` iterations.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    if max_iter < 1:
        raise ConfigError("max_iter must be at least 1")
    if not (np.isfinite(tol) and tol >= 0):
        raise ConfigError("tol must be a non-negative number")
    del seed  # reserved; all paths are deterministic

    params = _initial_params(img, k)
    trace = [log_likelihood(img, params)]
    for _ in range(max_iter):
        post = e_step(img, params)
        params = m_step(img, post, pooled_variance=pooled_variance)
        trace.append(log_likelihood(img, params))
        if abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            break

    raw = np.argmax(e_step(img, params).resp, axis=1)
    present = np.unique(raw)
    if present.size < k:
        raw = np.searchsorted(present, raw)
    labels = LabelMap(raw.reshape(img.pixels.shape), int(present.size))
    return GmmResult(labels=labels, params=params, ll_trace=np.array(trace))
