"""Staged 3-D spatio-temporal feature extractor with intermediate taps.

Four conv/pool stages expose their outputs for multi-scale mask decoding;
a fifth stage produces the embedding tensor. The score pipeline owns two
independent instances (they never share parameters): one supplies the mask
embedding and staged taps, the other supplies the video embedding that is
gated by it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import ConfigError

NUM_STAGES = 4

Shape3d = tuple[int, int, int, int]  # (C, T, H, W)


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 3
    stage_channels: tuple[int, ...] = (8, 12, 16, 24)
    stage_pool_t: tuple[int, ...] = (1, 2, 2, 2)
    stage_pool_s: tuple[int, ...] = (2, 2, 2, 2)
    embed_channels: int = 32

    def __post_init__(self) -> None:
        for name in ("stage_channels", "stage_pool_t", "stage_pool_s"):
            v = getattr(self, name)
            if len(v) != NUM_STAGES:
                raise ConfigError(f"{name} must have {NUM_STAGES} entries, got {len(v)}")
            if any(int(x) < 1 for x in v):
                raise ConfigError(f"{name} entries must be positive")
        if self.in_channels < 1 or self.embed_channels < 1:
            raise ConfigError("channel counts must be positive")

    def stage_shapes(self, in_shape: Shape3d) -> list[Shape3d]:
        """Declared output shape of every tapped stage plus the embedding.

        Pure function of (input shape, config); raises when a pooled
        dimension would not divide evenly.
        """
        c, t, h, w = in_shape
        if c != self.in_channels:
            raise ConfigError(f"input has {c} channels, config expects {self.in_channels}")
        shapes: list[Shape3d] = []
        for j in range(NUM_STAGES):
            pt, ps = self.stage_pool_t[j], self.stage_pool_s[j]
            if t % pt or h % ps or w % ps:
                raise ConfigError(
                    f"stage {j + 1} pool ({pt},{ps},{ps}) does not divide ({t},{h},{w})"
                )
            t, h, w = t // pt, h // ps, w // ps
            shapes.append((self.stage_channels[j], t, h, w))
        shapes.append((self.embed_channels, t, h, w))
        return shapes


@dataclass(frozen=True)
class StagedFeatures:
    stage_outputs: tuple[torch.Tensor, ...]  # 4 tensors [N, C_j, T_j, H_j, W_j]
    embedding: torch.Tensor  # [N, C_e, T_e, H_e, W_e]


class StagedBackbone(nn.Module):
    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        stages = []
        in_ch = cfg.in_channels
        for j in range(NUM_STAGES):
            out_ch = cfg.stage_channels[j]
            stride = (cfg.stage_pool_t[j], cfg.stage_pool_s[j], cfg.stage_pool_s[j])
            # downsampling folded into the conv stride: same tap shapes as a
            # conv+pool stage at a fraction of the CPU cost
            stages.append(
                nn.Sequential(
                    nn.Conv3d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1),
                    nn.ReLU(inplace=True),
                )
            )
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)
        self.embed = nn.Sequential(
            nn.Conv3d(in_ch, cfg.embed_channels, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
        )

    def extract_staged(self, snippets: torch.Tensor) -> StagedFeatures:
        """snippets: [N, C, T, H, W] -> taps of every stage + embedding."""
        declared = self.cfg.stage_shapes(tuple(snippets.shape[1:]))
        x = snippets
        taps = []
        for j, stage in enumerate(self.stages):
            x = stage(x)
            if tuple(x.shape[1:]) != declared[j]:
                raise ConfigError(
                    f"stage {j + 1} produced {tuple(x.shape[1:])}, declared {declared[j]}"
                )
            taps.append(x)
        emb = self.embed(x)
        return StagedFeatures(stage_outputs=tuple(taps), embedding=emb)

    def video_embedding(self, snippets: torch.Tensor) -> torch.Tensor:
        return self.extract_staged(snippets).embedding

    forward = extract_staged
