"""Spatial action parsing: multi-scale mask pyramid and gated features.

Every tapped backbone stage feeds two upsampling branches back to mask
resolution: branch 2 yields a supervised per-scale mask prediction, branch 1
feeds a learned channel-concat fusion that yields the final mask. Per-snippet
predictions are stitched back to video length by averaging overlapped frames.
The target representation gates the video embedding with the sigmoid of the
mask embedding, suppressing background features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .backbone import BackboneConfig, StagedFeatures
from .data import SnippetLayout
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class MaskPyramid:
    """Stitched video-length mask tensors; up2 and fused lie in [0, 1]."""

    up1: tuple[torch.Tensor, ...]  # 4 x [B, T, H, W], unsquashed
    up2: tuple[torch.Tensor, ...]  # 4 x [B, T, H, W], in [0, 1]
    fused: torch.Tensor  # [B, T, H, W], in [0, 1]

    def supervised(self) -> tuple[torch.Tensor, ...]:
        """Exactly the five loss targets: the four up2 scales plus fused."""
        return (*self.up2, self.fused)


@dataclass(frozen=True)
class TargetRepresentation:
    gated: torch.Tensor  # X_V, same shape as the video embedding
    mask_embedding: torch.Tensor  # B_5 output
    pyramid: MaskPyramid | None  # None when mask decoding was skipped


class _BlockUpsample(nn.Module):
    """Transposed convolution with kernel == stride (non-overlapping blocks),
    computed as a channel matmul + voxel interleave, which is equivalent and
    much faster on CPU than the generic transposed-conv path."""

    def __init__(self, in_channels: int, factor: tuple[int, int, int]):
        super().__init__()
        self.factor = factor
        k = factor[0] * factor[1] * factor[2]
        bound = 1.0 / (in_channels**0.5)
        self.weight = nn.Parameter(torch.empty(in_channels, k).uniform_(-bound, bound))
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, c, t, h, w = x.shape
        ft, fh, fw = self.factor
        y = x.permute(0, 2, 3, 4, 1).reshape(-1, c) @ self.weight
        y = y.reshape(n, t, h, w, ft, fh, fw)
        y = y.permute(0, 1, 4, 2, 5, 3, 6).reshape(n, 1, t * ft, h * fh, w * fw)
        return y + self.bias


class _UpBranch(nn.Module):
    """1x1x1 feature conv followed by a transposed conv back to mask size."""

    def __init__(self, in_channels: int, mid_channels: int, factor: tuple[int, int, int]):
        super().__init__()
        self.reduce = nn.Conv3d(in_channels, mid_channels, kernel_size=1)
        self.up = _BlockUpsample(mid_channels, factor)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.up(torch.relu(self.reduce(x)))


class _FusionConv(nn.Module):
    """Learned 1x1x1 3-D convolution over the concatenated mask channels,
    written as an explicit channel mix (the generic conv3d path is very slow
    for 4->1 channels on CPU)."""

    def __init__(self, in_channels: int = 4):
        super().__init__()
        bound = 1.0 / (in_channels**0.5)
        self.weight = nn.Parameter(torch.empty(in_channels).uniform_(-bound, bound))
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: [B, C, T, H, W] -> [B, 1, T, H, W]
        w = self.weight.view(1, -1, 1, 1, 1)
        return (x * w).sum(dim=1, keepdim=True) + self.bias


def fuse_masks(branches: Sequence[torch.Tensor], conv: nn.Module) -> torch.Tensor:
    """Channel-concatenate the four branch-1 maps [B, T, H, W] and apply the
    learned 3-D convolution; squashed to [0, 1]."""
    if len(branches) != 4:
        raise DataError(f"mask fusion needs 4 branch tensors, got {len(branches)}")
    stacked = torch.stack(tuple(branches), dim=1)  # [B, 4, T, H, W]
    return torch.sigmoid(conv(stacked)).squeeze(1)


class MaskPyramidHead(nn.Module):
    """Decodes staged snippet features into the five supervised masks."""

    def __init__(
        self,
        backbone_cfg: BackboneConfig,
        layout: SnippetLayout,
        mask_height: int,
        mask_width: int,
        mid_channels: int = 8,
    ):
        super().__init__()
        self.layout = layout
        self.mask_shape = (layout.snippet_len, mask_height, mask_width)
        in_shape = (backbone_cfg.in_channels, *self.mask_shape)
        stage_shapes = backbone_cfg.stage_shapes(in_shape)[:-1]
        up1, up2 = [], []
        for j, (c, t, h, w) in enumerate(stage_shapes):
            target = self.mask_shape
            if target[0] % t or target[1] % h or target[2] % w:
                raise ConfigError(
                    f"stage {j + 1} tap ({t},{h},{w}) cannot upsample evenly to {target}"
                )
            factor = (target[0] // t, target[1] // h, target[2] // w)
            up1.append(_UpBranch(c, mid_channels, factor))
            up2.append(_UpBranch(c, mid_channels, factor))
        self.up1_branches = nn.ModuleList(up1)
        self.up2_branches = nn.ModuleList(up2)
        self.fuse_conv = _FusionConv(4)

    def forward(self, staged: StagedFeatures, batch_size: int) -> MaskPyramid:
        """staged holds [B*N, ...] snippet features; returns stitched masks."""

        def stitch(per_snippet: torch.Tensor) -> torch.Tensor:
            # [B*N, 1, len, H, W] -> [B, T, H, W]
            m = per_snippet.squeeze(1)
            m = m.reshape(batch_size, self.layout.num_snippets, *m.shape[1:])
            return stitch_snippets(m, self.layout)

        up1 = tuple(
            stitch(branch(tap)) for branch, tap in zip(self.up1_branches, staged.stage_outputs)
        )
        up2 = tuple(
            stitch(torch.sigmoid(branch(tap)))
            for branch, tap in zip(self.up2_branches, staged.stage_outputs)
        )
        return MaskPyramid(up1=up1, up2=up2, fused=fuse_masks(up1, self.fuse_conv))


def stitch_snippets(per_snippet: torch.Tensor, layout: SnippetLayout) -> torch.Tensor:
    """Reassemble [B, N, len, ...] snippet maps to [B, T, ...], averaging
    frames covered by multiple snippets."""
    batch = per_snippet.shape[0]
    total = layout.total_frames
    trailing = per_snippet.shape[3:]
    out = per_snippet.new_zeros((batch, total, *trailing))
    counts = per_snippet.new_zeros((total,) + (1,) * len(trailing))
    for i, start in enumerate(layout.starts()):
        out[:, start : start + layout.snippet_len] += per_snippet[:, i]
        counts[start : start + layout.snippet_len] += 1.0
    return out / counts


def gate_target_representation(
    video_emb: torch.Tensor, mask_emb: torch.Tensor
) -> torch.Tensor:
    """X_V = video embedding * sigmoid(mask embedding), elementwise."""
    if video_emb.shape != mask_emb.shape:
        raise ConfigError(
            f"gate shape mismatch: video embedding {tuple(video_emb.shape)} vs "
            f"mask embedding {tuple(mask_emb.shape)}"
        )
    return video_emb * torch.sigmoid(mask_emb)


def binarize_mask(prob_mask: torch.Tensor, threshold: float = 0.5) -> torch.Tensor:
    """Hard mask: 1 where probability exceeds the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    return (prob_mask > threshold).to(torch.uint8)
