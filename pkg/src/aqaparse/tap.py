"""Temporal action parsing: transition probabilities, localization, steps.

The transition head predicts per-frame transition probabilities at the
embedding time-resolution and linearly upsamples them to video length; the
k-th transition is then the probability argmax inside its bin
(floor((k-1)T/L'), floor(kT/L')], ties broken toward the earliest frame.
Parsed steps are resampled to a fixed length by linear interpolation before
the pairwise attention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .data import TransitionSet, transition_bins
from .errors import DataError

__all__ = [
    "TransitionSet",
    "TransitionProbMap",
    "TransitionHead",
    "locate_transitions",
    "segment_steps",
    "resample_step",
]


@dataclass(frozen=True)
class TransitionProbMap:
    """Per-frame, per-transition probabilities, shape [T, L'] in [0, 1]."""

    probs: torch.Tensor

    def __post_init__(self) -> None:
        p = self.probs
        if p.ndim != 2:
            raise DataError(f"expected [T, L'] probabilities, got shape {tuple(p.shape)}")
        if p.numel() and (float(p.min()) < 0.0 or float(p.max()) > 1.0):
            raise DataError("transition probabilities outside [0, 1]")


class TransitionHead(nn.Module):
    """Two temporal convolutions on the gated timeline -> upsampled probs."""

    def __init__(self, in_channels: int, num_transitions: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or in_channels
        self.conv1 = nn.Conv1d(in_channels, hidden, kernel_size=3, padding=1)
        self.conv2 = nn.Conv1d(hidden, num_transitions, kernel_size=3, padding=1)
        self.num_transitions = num_transitions

    def forward(self, timeline: torch.Tensor, total_frames: int) -> torch.Tensor:
        """timeline: [B, C, T_embed] -> probabilities [B, T, L']."""
        x = self.conv2(torch.relu(self.conv1(timeline)))
        probs = torch.sigmoid(x)  # [B, L', T_embed]
        probs = F.interpolate(probs, size=total_frames, mode="linear", align_corners=True)
        return probs.permute(0, 2, 1)


def locate_transitions(probs, total_frames: int | None = None) -> TransitionSet:
    """Constrained argmax per transition column; strictly increasing output.

    Accepts a [T, L'] tensor/array or a TransitionProbMap.
    """
    if isinstance(probs, TransitionProbMap):
        probs = probs.probs
    if isinstance(probs, torch.Tensor):
        probs = probs.detach().cpu().numpy()
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise DataError(f"expected [T, L'] probabilities, got shape {probs.shape}")
    t_frames = total_frames if total_frames is not None else probs.shape[0]
    if t_frames != probs.shape[0]:
        raise DataError(f"probability map covers {probs.shape[0]} frames, expected {t_frames}")
    bins = transition_bins(t_frames, probs.shape[1])
    timestamps = []
    for k, (lo, hi) in enumerate(bins):
        if k == len(bins) - 1:
            hi -= 1  # frame T would leave an empty final step
        if hi <= lo:
            raise DataError(f"transition bin {k + 1} of ({lo}, {hi}] has no searchable frame")
        column = probs[lo:hi, k]  # frames lo+1 .. hi, 1-indexed
        timestamps.append(lo + int(np.argmax(column)) + 1)
    return TransitionSet(tuple(timestamps), t_frames)


def segment_steps(features: torch.Tensor, transitions: TransitionSet) -> list[torch.Tensor]:
    """Split time-first features [T, ...] into the L'+1 step intervals."""
    if features.shape[0] != transitions.total_frames:
        raise DataError(
            f"features cover {features.shape[0]} frames, transitions expect "
            f"{transitions.total_frames}"
        )
    steps = []
    for a, b in transitions.intervals():
        steps.append(features[a:b])
    return steps


def resample_step(step: torch.Tensor, target_len: int) -> torch.Tensor:
    """Linear time resampling of [n, ...] to [target_len, ...].

    Identity when n == target_len; endpoint-aligned, so values stay within
    the input's min/max envelope.
    """
    if target_len < 1:
        raise DataError(f"target_len must be >= 1, got {target_len}")
    n = step.shape[0]
    if n < 1:
        raise DataError("cannot resample an empty step")
    if n == target_len:
        return step
    flat = step.reshape(n, -1).T.unsqueeze(0)  # [1, C, n]
    if n == 1:
        out = flat.expand(1, flat.shape[1], target_len)
    else:
        out = F.interpolate(flat, size=target_len, mode="linear", align_corners=True)
    return out.squeeze(0).T.reshape(target_len, *step.shape[1:])
