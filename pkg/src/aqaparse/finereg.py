"""Contrastive score regression over pairwise step features.

For each step, query-video features attend over the exemplar's features
(one-directional cross-attention, single block); the attended features are
mean-pooled over time and fed to two three-layer ReLU MLP heads that output
per-step relative scores. The predicted score is the lambda-weighted sum of
relative scores offset by the exemplar's ground-truth score; inference
averages this over E exemplars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .data import VideoSample
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class FusedStepFeatures:
    """Cross-attended features for one step pair (static part optional)."""

    d_v: torch.Tensor  # [step_len, C]
    d_s: torch.Tensor | None  # [duration, C] or None when SVE is disabled


@dataclass(frozen=True)
class ScoreAssemblyConfig:
    lambdas: tuple[float, ...] = (3.0, 5.0, 2.0)
    head_hidden: int = 64

    def __post_init__(self) -> None:
        if any(l <= 0 for l in self.lambdas):
            raise ConfigError(f"step weights must be positive: {self.lambdas}")
        if self.head_hidden < 1:
            raise ConfigError("head_hidden must be positive")


class CrossAttention(nn.Module):
    """Single pre-norm cross-attention block with a small feed-forward."""

    def __init__(self, dim: int, num_heads: int = 4):
        super().__init__()
        if dim % num_heads:
            raise ConfigError(f"dim {dim} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, 2 * dim), nn.ReLU(), nn.Linear(2 * dim, dim))

    def attention_weights(self, query: torch.Tensor, keyvalue: torch.Tensor) -> torch.Tensor:
        """Softmax attention map [heads, Lq, Lk]; rows sum to 1."""
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(keyvalue))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        return torch.softmax(scores, dim=-1)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        # [L, D] -> [heads, L, head_dim]
        return x.reshape(x.shape[0], self.num_heads, self.head_dim).transpose(0, 1)

    def forward(self, query: torch.Tensor, keyvalue: torch.Tensor) -> torch.Tensor:
        """query: [Lq, D], keyvalue: [Lk, D] -> [Lq, D]."""
        if query.shape[-1] != keyvalue.shape[-1]:
            raise DataError(
                f"feature width mismatch: {query.shape[-1]} vs {keyvalue.shape[-1]}"
            )
        weights = self.attention_weights(query, keyvalue)
        v = self._split(self.v_proj(keyvalue))
        attended = (weights @ v).transpose(0, 1).reshape(query.shape[0], -1)
        x = self.norm1(query + self.out_proj(attended))
        return self.norm2(x + self.ffn(x))


class RelativeScoreHead(nn.Module):
    """Three affine layers with ReLU between."""

    def __init__(self, in_channels: int, hidden: int = 64):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(in_channels, hidden),
            nn.ReLU(),
            nn.Linear(hidden, hidden),
            nn.ReLU(),
            nn.Linear(hidden, 1),
        )

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        return self.mlp(pooled).squeeze(-1)


def regress_relative(
    fused: FusedStepFeatures, head_v: RelativeScoreHead, head_s: RelativeScoreHead | None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean-pool fused step features over time, then apply the two heads."""
    r_v = head_v(fused.d_v.mean(dim=0))
    if fused.d_s is None or head_s is None:
        r_s = torch.zeros((), dtype=r_v.dtype, device=r_v.device)
    else:
        r_s = head_s(fused.d_s.mean(dim=0))
    return r_v, r_s


def assemble_score(relative, lambdas: Sequence[float], exemplar_score: float):
    """Predicted score = sum_l lambda_l * (r_v_l + r_s_l) + y_Z.

    `relative` is a sequence of per-step (r_v, r_s) pairs (floats or scalar
    tensors); tensor inputs keep the graph for training.
    """
    if len(relative) != len(lambdas):
        raise ConfigError(
            f"{len(relative)} relative score pairs but {len(lambdas)} step weights"
        )
    total = None
    for lam, (r_v, r_s) in zip(lambdas, relative):
        term = lam * (r_v + r_s)
        total = term if total is None else total + term
    return total + exemplar_score


@dataclass(frozen=True)
class PredictionRecord:
    """Inference output for one query: voted score plus its decomposition."""

    sample_id: str
    prediction: float
    exemplar_contributions: tuple[float, ...]  # per-exemplar (relative + y_Z)
    exemplar_ids: tuple[str, ...]
    per_step_relative: tuple[tuple[float, float], ...]  # mean (r_v, r_s) per step

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "prediction": self.prediction,
            "exemplar_contributions": list(self.exemplar_contributions),
            "exemplar_ids": list(self.exemplar_ids),
            "per_step_relative": [list(p) for p in self.per_step_relative],
        }


def predict_multi_exemplar(
    model, query: VideoSample, exemplars: Sequence[VideoSample]
) -> PredictionRecord:
    """Average the single-pair prediction over all exemplars (fixed order).

    `model` must provide predict_pair(query, exemplar) -> (score, per-step
    (r_v, r_s) float pairs); any model honoring that contract works.
    """
    if not exemplars:
        raise DataError("multi-exemplar prediction needs at least one exemplar")
    contributions = []
    step_relatives = []
    for exemplar in exemplars:
        score, relative = model.predict_pair(query, exemplar)
        contributions.append(float(score))
        step_relatives.append(relative)
    prediction = float(np.mean(contributions))
    num_steps = len(step_relatives[0])
    mean_relative = tuple(
        (
            float(np.mean([rel[l][0] for rel in step_relatives])),
            float(np.mean([rel[l][1] for rel in step_relatives])),
        )
        for l in range(num_steps)
    )
    return PredictionRecord(
        sample_id=query.sample_id,
        prediction=prediction,
        exemplar_contributions=tuple(contributions),
        exemplar_ids=tuple(e.sample_id for e in exemplars),
        per_step_relative=mean_relative,
    )
