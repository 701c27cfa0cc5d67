"""Full assessment network: parse both videos, score the pair.

parse() runs one video batch through the two backbones, the mask pyramid,
the gate, the transition head, and (optionally) the static encoder, and
returns everything downstream scoring needs. score_pair_from_parsed()
cross-attends the per-step features of a (query, exemplar) pair and
assembles the predicted score.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .backbone import BackboneConfig, StagedBackbone
from .data import SnippetLayout, TransitionSet, VideoSample
from .errors import ConfigError, DataError
from .finereg import (
    CrossAttention,
    FusedStepFeatures,
    RelativeScoreHead,
    assemble_score,
    regress_relative,
)
from .sap import MaskPyramid, MaskPyramidHead, TargetRepresentation, gate_target_representation
from .sve import STEP_DURATIONS, StaticEncoder, StepProjector, split_by_transitions
from .tap import TransitionHead, locate_transitions, resample_step, segment_steps


@dataclass(frozen=True)
class ModelConfig:
    frames: int = 96
    height: int = 32
    width: int = 32
    num_transitions: int = 2
    lambdas: tuple[float, ...] = (3.0, 5.0, 2.0)
    num_snippets: int = 9
    snippet_len: int = 16
    snippet_stride: int = 10
    stage_channels: tuple[int, ...] = (8, 12, 16, 24)
    stage_pool_t: tuple[int, ...] = (1, 2, 2, 2)
    stage_pool_s: tuple[int, ...] = (2, 2, 2, 2)
    embed_channels: int = 32
    pyramid_mid_channels: int = 8
    tap_step_len: int = 8
    sve_width: int = 16
    sve_duration: int = 4
    attn_heads: int = 4
    head_hidden: int = 64
    use_gating: bool = True
    use_sve: bool = True
    mask_threshold: float = 0.5

    def __post_init__(self) -> None:
        if len(self.lambdas) != self.num_transitions + 1:
            raise ConfigError(
                f"{len(self.lambdas)} step weights cannot cover "
                f"{self.num_transitions + 1} steps (need len(lambdas) == num steps)"
            )
        if any(l <= 0 for l in self.lambdas):
            raise ConfigError(f"step weights must be positive: {self.lambdas}")
        if self.sve_duration not in STEP_DURATIONS:
            raise ConfigError(
                f"sve_duration must be one of {STEP_DURATIONS}, got {self.sve_duration}"
            )
        if self.tap_step_len < 1:
            raise ConfigError("tap_step_len must be >= 1")
        if self.embed_channels % self.attn_heads:
            raise ConfigError(
                f"embed_channels {self.embed_channels} not divisible by "
                f"{self.attn_heads} attention heads"
            )
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError("mask_threshold must be in (0, 1)")
        if self.frames < self.num_transitions:
            raise ConfigError("frames must be >= num_transitions")

    @property
    def num_steps(self) -> int:
        return self.num_transitions + 1

    def snippet_layout(self) -> SnippetLayout:
        return SnippetLayout(self.num_snippets, self.snippet_len, self.snippet_stride)

    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(
            in_channels=3,
            stage_channels=self.stage_channels,
            stage_pool_t=self.stage_pool_t,
            stage_pool_s=self.stage_pool_s,
            embed_channels=self.embed_channels,
        )

    def validate_shapes(self) -> None:
        """Run every static shape check without building modules."""
        self.snippet_layout().check(self.frames)
        shapes = self.backbone_config().stage_shapes((3, self.snippet_len, self.height, self.width))
        for j, (c, t, h, w) in enumerate(shapes[:-1]):
            if self.snippet_len % t or self.height % h or self.width % w:
                raise ConfigError(
                    f"stage {j + 1} tap ({t},{h},{w}) cannot upsample evenly to "
                    f"({self.snippet_len},{self.height},{self.width})"
                )


@dataclass
class ParsedVideo:
    """Everything parse() extracts from one batch of videos."""

    target: TargetRepresentation
    timeline: torch.Tensor  # [B, T, C] gated features at frame resolution
    probs: torch.Tensor  # [B, T, L'] transition probabilities
    transition_sets: tuple[TransitionSet, ...]  # length B
    steps_v: list[list[torch.Tensor]]  # B x (L'+1) x [tap_step_len, C]
    steps_s: list[list[torch.Tensor]] | None  # B x (L'+1) x [duration, C]
    static_per_frame: torch.Tensor | None  # [B, T, C]

    @property
    def pyramid(self) -> MaskPyramid | None:
        return self.target.pyramid


class AQAModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate_shapes()
        self.cfg = cfg
        layout = cfg.snippet_layout()
        bb_cfg = cfg.backbone_config()
        self.sap_backbone = StagedBackbone(bb_cfg)
        self.tap_backbone = StagedBackbone(bb_cfg)
        self.pyramid_head = MaskPyramidHead(
            bb_cfg, layout, cfg.height, cfg.width, cfg.pyramid_mid_channels
        )
        self.transition_head = TransitionHead(cfg.embed_channels, cfg.num_transitions)
        if cfg.use_sve:
            self.sve_encoder = StaticEncoder(3, cfg.sve_width, cfg.embed_channels)
            self.sve_projector = StepProjector(
                cfg.num_steps, cfg.embed_channels, cfg.embed_channels, cfg.sve_duration
            )
            self.attn_s = CrossAttention(cfg.embed_channels, cfg.attn_heads)
            self.head_s = RelativeScoreHead(cfg.embed_channels, cfg.head_hidden)
        else:
            self.sve_encoder = None
            self.sve_projector = None
            self.attn_s = None
            self.head_s = None
        self.attn_v = CrossAttention(cfg.embed_channels, cfg.attn_heads)
        self.head_v = RelativeScoreHead(cfg.embed_channels, cfg.head_hidden)

    # ------------------------------------------------------------------
    # parsing
    # ------------------------------------------------------------------

    def _snippet_batch(self, frames: torch.Tensor) -> torch.Tensor:
        """[B, T, H, W, 3] -> [B*N, 3, len, H, W] sliding snippet windows."""
        layout = self.cfg.snippet_layout()
        layout.check(frames.shape[1])
        windows = [
            frames[:, s : s + layout.snippet_len] for s in layout.starts()
        ]  # N x [B, len, H, W, 3]
        stacked = torch.stack(windows, dim=1)  # [B, N, len, H, W, 3]
        b, n = stacked.shape[:2]
        return stacked.permute(0, 1, 5, 2, 3, 4).reshape(
            b * n, 3, layout.snippet_len, frames.shape[2], frames.shape[3]
        )

    def parse(
        self,
        frames: torch.Tensor,
        transitions_override: Sequence[TransitionSet] | None = None,
        compute_pyramid: bool = True,
    ) -> ParsedVideo:
        """compute_pyramid=False skips the mask branches (the gate only needs
        the mask embedding), e.g. for exemplar videos whose masks carry no loss."""
        cfg = self.cfg
        if frames.ndim != 5 or frames.shape[-1] != 3:
            raise DataError(f"expected frames [B, T, H, W, 3], got {tuple(frames.shape)}")
        batch, total_frames = frames.shape[0], frames.shape[1]
        snippets = self._snippet_batch(frames)

        staged = self.sap_backbone.extract_staged(snippets)
        pyramid = self.pyramid_head(staged, batch) if compute_pyramid else None
        video_emb = self.tap_backbone.video_embedding(snippets)
        if video_emb.shape != staged.embedding.shape:
            raise ConfigError(
                f"video embedding {tuple(video_emb.shape)} and mask embedding "
                f"{tuple(staged.embedding.shape)} must match for the gate"
            )
        if cfg.use_gating:
            gated = gate_target_representation(video_emb, staged.embedding)
        else:
            gated = video_emb
        target = TargetRepresentation(gated=gated, mask_embedding=staged.embedding, pyramid=pyramid)

        # spatially pool, lay snippets out in time, upsample to frame rate
        pooled = gated.mean(dim=(3, 4))  # [B*N, C, T_e]
        n = cfg.num_snippets
        emb_timeline = (
            pooled.reshape(batch, n, pooled.shape[1], pooled.shape[2])
            .permute(0, 2, 1, 3)
            .reshape(batch, pooled.shape[1], -1)
        )  # [B, C, N*T_e]
        probs = self.transition_head(emb_timeline, total_frames)  # [B, T, L']
        timeline = torch.nn.functional.interpolate(
            emb_timeline, size=total_frames, mode="linear", align_corners=True
        ).permute(0, 2, 1)  # [B, T, C]

        if transitions_override is not None:
            if len(transitions_override) != batch:
                raise DataError("one ground-truth transition set per batch item required")
            transition_sets = tuple(transitions_override)
        else:
            transition_sets = tuple(locate_transitions(probs[b]) for b in range(batch))

        steps_v = [
            [
                resample_step(seg, cfg.tap_step_len)
                for seg in segment_steps(timeline[b], transition_sets[b])
            ]
            for b in range(batch)
        ]

        steps_s = None
        static = None
        if self.sve_encoder is not None:
            static = self.sve_encoder(frames)  # [B, T, C]
            steps_s = [
                [
                    self.sve_projector(seg, l)
                    for l, seg in enumerate(split_by_transitions(static[b], transition_sets[b]))
                ]
                for b in range(batch)
            ]

        return ParsedVideo(
            target=target,
            timeline=timeline,
            probs=probs,
            transition_sets=transition_sets,
            steps_v=steps_v,
            steps_s=steps_s,
            static_per_frame=static,
        )

    # ------------------------------------------------------------------
    # pair scoring
    # ------------------------------------------------------------------

    def pair_relative(
        self, query: ParsedVideo, exemplar: ParsedVideo, q_idx: int = 0, e_idx: int = 0
    ) -> list[tuple[torch.Tensor, torch.Tensor]]:
        """Per-step (r_v, r_s) scalar tensors for one pair in the batches."""
        relative = []
        for l in range(self.cfg.num_steps):
            q_v, e_v = query.steps_v[q_idx][l], exemplar.steps_v[e_idx][l]
            if q_v.shape != e_v.shape:
                raise DataError(f"step {l}: feature shapes {tuple(q_v.shape)} vs {tuple(e_v.shape)}")
            d_v = self.attn_v(q_v, e_v)
            d_s = None
            if self.attn_s is not None:
                q_s, e_s = query.steps_s[q_idx][l], exemplar.steps_s[e_idx][l]
                if q_s.shape != e_s.shape:
                    raise DataError(
                        f"step {l}: static shapes {tuple(q_s.shape)} vs {tuple(e_s.shape)}"
                    )
                d_s = self.attn_s(q_s, e_s)
            relative.append(regress_relative(FusedStepFeatures(d_v, d_s), self.head_v, self.head_s))
        return relative

    def score_pair_from_parsed(
        self,
        query: ParsedVideo,
        exemplar: ParsedVideo,
        exemplar_score,
        q_idx: int = 0,
        e_idx: int = 0,
    ):
        relative = self.pair_relative(query, exemplar, q_idx, e_idx)
        return assemble_score(relative, self.cfg.lambdas, exemplar_score), relative

    def relative_pair_floats(
        self, query: ParsedVideo, exemplar: ParsedVideo, q_idx: int = 0, e_idx: int = 0
    ) -> tuple[tuple[float, float], ...]:
        relative = self.pair_relative(query, exemplar, q_idx, e_idx)
        return tuple((float(rv), float(rs)) for rv, rs in relative)

    def predict_pair(
        self, query: VideoSample, exemplar: VideoSample
    ) -> tuple[float, tuple[tuple[float, float], ...]]:
        """Single-pair inference: predicted score and per-step relatives.

        The score is assembled in Python floats so the zero-relative case
        returns the exemplar score bit-exactly.
        """
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                qp = self.parse(frames_to_tensor([query]))
                ep = self.parse(frames_to_tensor([exemplar]))
                relative = self.relative_pair_floats(qp, ep)
        finally:
            self.train(was_training)
        return float(assemble_score(relative, self.cfg.lambdas, exemplar.score)), relative


def frames_to_tensor(samples: Sequence[VideoSample], device=None) -> torch.Tensor:
    """Stack sample frames into a float32 [B, T, H, W, 3] tensor."""
    arr = np.stack([s.frames for s in samples])
    return torch.from_numpy(arr).to(device) if device else torch.from_numpy(arr)


def masks_to_tensor(samples: Sequence[VideoSample], device=None) -> torch.Tensor:
    arr = np.stack([s.masks for s in samples]).astype(np.float32)
    return torch.from_numpy(arr).to(device) if device else torch.from_numpy(arr)


def build_model(cfg: ModelConfig, seed: int) -> AQAModel:
    """Deterministic model construction from a seed."""
    torch.manual_seed(seed)
    return AQAModel(cfg)
