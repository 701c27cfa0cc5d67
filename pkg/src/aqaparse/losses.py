"""Training objective: focal mask loss + dense transition BCE + score MSE.

All loss functions consume probabilities (not logits), clamp them at
PROB_EPS for log stability, and return scalar tensors suitable for
autograd. The total objective is the unweighted sum of the three parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from .data import TransitionSet
from .errors import ConfigError, DataError

PROB_EPS = 1e-7


@dataclass(frozen=True)
class FocalConfig:
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"focal alpha must be in (0, 1), got {self.alpha}")
        if self.gamma < 0.0:
            raise ConfigError(f"focal gamma must be >= 0, got {self.gamma}")


def focal_loss(pred: torch.Tensor, gt: torch.Tensor, cfg: FocalConfig) -> torch.Tensor:
    """Mean of -alpha * (1-p)^gamma * log(p), p = pred where gt=1 else 1-pred."""
    if pred.shape != gt.shape:
        raise DataError(f"prediction shape {tuple(pred.shape)} != mask shape {tuple(gt.shape)}")
    gt = gt.to(pred.dtype)
    p = torch.where(gt > 0.5, pred, 1.0 - pred).clamp_min(PROB_EPS)
    return (-cfg.alpha * (1.0 - p) ** cfg.gamma * torch.log(p)).mean()


def focal_mask_loss(
    predictions: Sequence[torch.Tensor], gt: torch.Tensor, cfg: FocalConfig
) -> torch.Tensor:
    """Sum of per-tensor mean focal losses over the supervised mask stack."""
    if not predictions:
        raise DataError("no mask predictions supplied")
    total = focal_loss(predictions[0], gt, cfg)
    for pred in predictions[1:]:
        total = total + focal_loss(pred, gt, cfg)
    return total


def transition_targets(
    transitions: TransitionSet | Sequence[int], total_frames: int, num_transitions: int
) -> torch.Tensor:
    """One-hot [T, L'] targets: column k is 1 exactly at frame t_k."""
    ts = transitions.timestamps if isinstance(transitions, TransitionSet) else tuple(transitions)
    if len(ts) != num_transitions:
        raise DataError(f"expected {num_transitions} transitions, got {len(ts)}")
    target = torch.zeros(total_frames, num_transitions)
    for k, t in enumerate(ts):
        if not 1 <= t <= total_frames:
            raise DataError(f"transition timestamp {t} outside [1, {total_frames}]")
        target[t - 1, k] = 1.0
    return target


def transition_bce_loss(
    probs: torch.Tensor, transitions: TransitionSet | Sequence[int]
) -> torch.Tensor:
    """Dense binary cross-entropy on a [T, L'] probability map vs one-hot
    ground-truth timestamps, normalized by T * L'."""
    if probs.ndim != 2:
        raise DataError(f"expected a [T, L'] map, got shape {tuple(probs.shape)}")
    total_frames, num_transitions = probs.shape
    target = transition_targets(transitions, total_frames, num_transitions).to(probs.dtype)
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    bce = -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p))
    return bce.mean()


def regression_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Squared error (mean over any batch dimension)."""
    return ((pred - target) ** 2).mean()


def total_loss(
    l_sap: torch.Tensor, l_tap: torch.Tensor, l_reg: torch.Tensor
) -> torch.Tensor:
    return l_sap + l_tap + l_reg
