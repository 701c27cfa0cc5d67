"""Static visual encoding: per-frame residual features, split into steps.

A small residual image encoder maps every frame to one feature vector
(stateless per frame). Frame features are split at the predicted
transitions, resampled to a fixed per-step duration, and passed through a
per-step learned projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .data import TransitionSet
from .errors import ConfigError, DataError
from .tap import resample_step

STEP_DURATIONS = (2, 4, 8)


@dataclass(frozen=True)
class StaticFeatures:
    per_frame: torch.Tensor  # [T, C_s]
    per_step: tuple[torch.Tensor, ...]  # L'+1 tensors [duration, C_p]


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.relu(x + self.conv2(torch.relu(self.conv1(x))))


class StaticEncoder(nn.Module):
    """Per-frame residual CNN -> [B, T, out_channels]."""

    def __init__(self, in_channels: int = 3, width: int = 16, out_channels: int = 32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, width, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            _ResidualBlock(width),
            nn.Conv2d(width, 2 * width, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            _ResidualBlock(2 * width),
            nn.AdaptiveAvgPool2d(1),
        )
        self.proj = nn.Linear(2 * width, out_channels)
        self.out_channels = out_channels

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """frames: [B, T, H, W, 3] -> per-frame features [B, T, C_s]."""
        b, t = frames.shape[:2]
        x = frames.reshape(b * t, *frames.shape[2:]).permute(0, 3, 1, 2)
        feats = self.net(x).flatten(1)  # [B*T, 2*width]
        return self.proj(feats).reshape(b, t, -1)


def split_by_transitions(
    per_frame: torch.Tensor, transitions: TransitionSet
) -> list[torch.Tensor]:
    """Rows [1, t_1], (t_1, t_2], ..., (t_L', T] of a [T, C] feature matrix."""
    if per_frame.shape[0] != transitions.total_frames:
        raise DataError(
            f"per-frame features cover {per_frame.shape[0]} frames, transitions "
            f"expect {transitions.total_frames}"
        )
    cuts = [t for t in transitions.timestamps]
    return list(torch.tensor_split(per_frame, cuts, dim=0))


class StepProjector(nn.Module):
    """Per-step affine projection after resampling to the fixed duration."""

    def __init__(self, num_steps: int, in_channels: int, out_channels: int, duration: int = 4):
        super().__init__()
        if duration not in STEP_DURATIONS:
            raise ConfigError(f"step duration must be one of {STEP_DURATIONS}, got {duration}")
        self.duration = duration
        self.projections = nn.ModuleList(
            nn.Linear(in_channels, out_channels) for _ in range(num_steps)
        )

    def forward(self, segment: torch.Tensor, step_index: int) -> torch.Tensor:
        """segment: [n, C_s] -> [duration, C_p] via resample + f_l."""
        if not 0 <= step_index < len(self.projections):
            raise DataError(f"step index {step_index} out of range")
        return self.projections[step_index](resample_step(segment, self.duration))
