"""Evaluation metrics: score correlation, step-interval IoU, mask quality.

Score metrics
  spearman_rho   rank correlation with average ranks for ties
  relative_l2    mean squared error normalized by the squared score range,
                 reported x100

Temporal metric
  aiou_at        fraction of samples whose mean per-step interval IoU
                 reaches the threshold d

Mask metrics
  mask_mae       mean absolute pixel error between a [0,1] prediction and a
                 binary ground truth
  f_measure      weighted harmonic mean of precision and recall on binary
                 masks, F = (1+b2)PR / (b2*P + R)
  s_measure      structural similarity between a real-valued map and a
                 binary ground truth: alpha * object-aware + (1-alpha) *
                 region-aware, following the standard structure-measure
                 recipe (foreground/background object terms; region SSIM on
                 the four quadrants split at the ground-truth centroid)

All functions are pure, deterministic, and numpy-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import TransitionSet
from .errors import ConfigError, MetricError

_EPS = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    beta2: float = 0.3  # F-measure beta^2
    alpha: float = 0.5  # S-measure object/region mix
    aiou_thresholds: tuple[float, ...] = (0.5, 0.75)
    mask_threshold: float = 0.5
    score_range: tuple[float, float] | None = None  # default: from test labels

    def __post_init__(self) -> None:
        if self.beta2 <= 0:
            raise ConfigError("beta2 must be > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError("mask_threshold must be in (0, 1)")
        if self.score_range is not None and self.score_range[1] <= self.score_range[0]:
            raise ConfigError("score_range must satisfy y_max > y_min")
        if any(not 0 < d <= 1 for d in self.aiou_thresholds):
            raise ConfigError("AIoU thresholds must lie in (0, 1]")


@dataclass(frozen=True)
class MetricReport:
    rho: float
    r_l2_x100: float
    aiou: Mapping[float, float]
    mae: float
    f_beta: float
    s_measure: float

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "r_l2_x100": self.r_l2_x100,
            "aiou": {str(k): v for k, v in self.aiou.items()},
            "mae": self.mae,
            "f_beta": self.f_beta,
            "s_measure": self.s_measure,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank block."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(preds: Sequence[float], gts: Sequence[float]) -> float:
    """Spearman rank correlation in [-1, 1]; raises on constant inputs."""
    p = np.asarray(preds, dtype=np.float64)
    g = np.asarray(gts, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1 or p.size < 2:
        raise MetricError(f"need two equal-length 1-D sequences of >= 2, got {p.shape}, {g.shape}")
    rp, rg = average_ranks(p), average_ranks(g)
    dp, dg = rp - rp.mean(), rg - rg.mean()
    denom = np.sqrt((dp * dp).sum() * (dg * dg).sum())
    if denom == 0.0:
        raise MetricError("rank correlation undefined: an input sequence is constant")
    return float((dp * dg).sum() / denom)


def relative_l2(
    preds: Sequence[float], gts: Sequence[float], y_min: float, y_max: float
) -> float:
    """(100/N) * sum(((pred - gt) / (y_max - y_min))^2)."""
    if y_max <= y_min:
        raise ConfigError(f"score range requires y_max > y_min, got [{y_min}, {y_max}]")
    p = np.asarray(preds, dtype=np.float64)
    g = np.asarray(gts, dtype=np.float64)
    if p.shape != g.shape:
        raise MetricError(f"shape mismatch {p.shape} vs {g.shape}")
    return float(100.0 * np.mean(((p - g) / (y_max - y_min)) ** 2))


def interval_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    """IoU of two half-open integer intervals (lo, hi]."""
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def sample_step_iou(pred: TransitionSet, gt: TransitionSet) -> float:
    """Mean IoU over the aligned step intervals of one sample."""
    if pred.num_steps != gt.num_steps or pred.total_frames != gt.total_frames:
        raise MetricError("prediction and ground truth parse different step structures")
    ious = [interval_iou(p, g) for p, g in zip(pred.intervals(), gt.intervals())]
    return float(np.mean(ious))


def aiou_at(
    pred_sets: Sequence[TransitionSet], gt_sets: Sequence[TransitionSet], d: float
) -> float:
    """Fraction of samples with mean step IoU >= d."""
    if len(pred_sets) != len(gt_sets) or not pred_sets:
        raise MetricError("need equal, nonzero numbers of predicted and ground-truth sets")
    hits = sum(1 for p, g in zip(pred_sets, gt_sets) if sample_step_iou(p, g) >= d)
    return hits / len(pred_sets)


def mask_mae(pred: np.ndarray, gt: np.ndarray) -> float:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise MetricError(f"mask shape mismatch {p.shape} vs {g.shape}")
    return float(np.abs(p - g).mean())


def f_measure(pred_binary: np.ndarray, gt: np.ndarray, beta2: float = 0.3) -> float:
    p = np.asarray(pred_binary).astype(bool)
    g = np.asarray(gt).astype(bool)
    if p.shape != g.shape:
        raise MetricError(f"mask shape mismatch {p.shape} vs {g.shape}")
    tp = float(np.logical_and(p, g).sum())
    fp = float(np.logical_and(p, ~g).sum())
    fn = float(np.logical_and(~p, g).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    denom = beta2 * precision + recall
    if denom == 0.0:
        return 0.0
    return float((1.0 + beta2) * precision * recall / denom)


def _object_term(region_values: np.ndarray) -> float:
    # 2x / (x^2 + 1 + sigma_x); statistics over the masked region only,
    # sample std (ddof=1), defined as 0 for regions smaller than 2
    if region_values.size == 0:
        return 0.0
    x = float(region_values.mean())
    sigma = float(region_values.std(ddof=1)) if region_values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _region_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x, y = float(pred.mean()), float(gt.mean())
    norm = max(n - 1, 1)
    sx = float(((pred - x) ** 2).sum() / norm)
    sy = float(((gt - y) ** 2).sum() / norm)
    sxy = float(((pred - x) * (gt - y)).sum() / norm)
    a = 4.0 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0.0:
        return float(a / (b + _EPS))
    return 1.0 if b == 0.0 else 0.0


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure of one 2-D [0,1] map against a binary mask, in [0, 1]."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2:
        raise MetricError(f"need matching 2-D masks, got {pred.shape} vs {gt.shape}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise MetricError("prediction values outside [0, 1]")
    y = float(g.mean())
    if y == 0.0:  # no foreground: reward a dark map
        return float(np.clip(1.0 - p.mean(), 0.0, 1.0))
    if y == 1.0:  # all foreground: reward a bright map
        return float(np.clip(p.mean(), 0.0, 1.0))

    # object-aware: foreground and background terms weighted by gt area
    s_object = y * _object_term(p[g == 1]) + (1.0 - y) * _object_term(
        (1.0 - p)[g == 0]
    )

    # region-aware: SSIM over the four quadrants split at the gt centroid,
    # weighted by quadrant area; empty quadrants carry zero weight
    h, w = g.shape
    rows, cols = np.nonzero(g)
    cy = int(np.round(rows.mean())) + 1
    cx = int(np.round(cols.mean())) + 1
    total = float(h * w)
    s_region = 0.0
    for rs, cs in ((slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, w)),
                   (slice(cy, h), slice(0, cx)), (slice(cy, h), slice(cx, w))):
        gq, pq = g[rs, cs], p[rs, cs]
        s_region += (gq.size / total) * _region_ssim(pq, gq)

    return float(np.clip(alpha * s_object + (1.0 - alpha) * s_region, 0.0, 1.0))


def video_s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Mean per-frame structure measure over a [T, H, W] stack."""
    if pred.shape != gt.shape or pred.ndim != 3:
        raise MetricError(f"need matching [T, H, W] stacks, got {pred.shape} vs {gt.shape}")
    return float(np.mean([s_measure(pf, gf, alpha) for pf, gf in zip(pred, gt)]))
