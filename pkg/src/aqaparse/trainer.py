"""Optimization loop, parameter groups, and metric evaluation.

Training pairs every query with a random same-action-type exemplar,
reshuffled per epoch from a generator derived from (seed, epoch), so a
resumed run replays exactly the batches of an uninterrupted one. Four Adam
parameter groups carry the per-module learning rates: sap (backbone +
pyramid), tap (backbone + transition head), sve (encoder + projections),
reg (attention + heads).
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from . import losses, metrics, sap
from .checkpoint import CheckpointBundle, restore_optimizer, save_checkpoint
from .config import EvalConfig, ExperimentConfig
from .data import TransitionSet, VideoSample, select_exemplars
from .errors import ConfigError, DataError, TrainingError
from .finereg import PredictionRecord, predict_multi_exemplar
from .model import AQAModel, ParsedVideo, build_model, frames_to_tensor, masks_to_tensor
from .tap import locate_transitions

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "l_sap", "l_tap", "l_reg", "total")


def parameter_groups(model: AQAModel) -> dict[str, list[torch.nn.Parameter]]:
    groups = {
        "sap": [*model.sap_backbone.parameters(), *model.pyramid_head.parameters()],
        "tap": [*model.tap_backbone.parameters(), *model.transition_head.parameters()],
        "sve": [],
        "reg": [*model.attn_v.parameters(), *model.head_v.parameters()],
    }
    if model.sve_encoder is not None:
        groups["sve"] = [*model.sve_encoder.parameters(), *model.sve_projector.parameters()]
        groups["reg"] += [*model.attn_s.parameters(), *model.head_s.parameters()]
    return groups


def build_optimizer(model: AQAModel, cfg: ExperimentConfig) -> torch.optim.Adam:
    tc = cfg.train
    rates = {"sap": tc.lr_sap, "tap": tc.lr_tap, "sve": tc.lr_sve, "reg": tc.lr_reg}
    param_groups = [
        {"params": params, "lr": rates[name], "name": name}
        for name, params in parameter_groups(model).items()
        if params
    ]
    return torch.optim.Adam(param_groups, lr=tc.lr_sap, weight_decay=tc.weight_decay)


@dataclass
class TrainOutput:
    model: AQAModel
    optimizer: torch.optim.Adam
    log_rows: list[dict]
    final_epoch: int


def _index_by_type(samples: Sequence[VideoSample]) -> dict[str, list[int]]:
    by_type: dict[str, list[int]] = defaultdict(list)
    for i, s in enumerate(samples):
        by_type[s.action_type].append(i)
    return by_type


def _pair_losses(
    model: AQAModel,
    queries: list[VideoSample],
    exemplars: list[VideoSample],
    cfg: ExperimentConfig,
    device,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    # mask/transition supervision applies to the query video (every sample is
    # a query once per epoch); the exemplar only contributes scoring features
    focal_cfg = cfg.train.focal()
    q_ts = [s.transition_set() for s in queries]
    e_ts = [s.transition_set() for s in exemplars]
    override_q = q_ts if cfg.train.teacher_force else None
    override_e = e_ts if cfg.train.teacher_force else None

    qp = model.parse(frames_to_tensor(queries, device), override_q)
    ep = model.parse(frames_to_tensor(exemplars, device), override_e, compute_pyramid=False)

    q_masks = masks_to_tensor(queries, device)
    l_sap = losses.focal_mask_loss(qp.pyramid.supervised(), q_masks, focal_cfg)

    l_tap = 0.0
    for b in range(len(queries)):
        l_tap = l_tap + losses.transition_bce_loss(qp.probs[b], q_ts[b])
    l_tap = l_tap / len(queries)

    l_reg = 0.0
    for b, (query, exemplar) in enumerate(zip(queries, exemplars)):
        pred, _ = model.score_pair_from_parsed(qp, ep, exemplar.score, b, b)
        l_reg = l_reg + losses.regression_loss(pred, torch.as_tensor(query.score, device=device))
    l_reg = l_reg / len(queries)
    return l_sap, l_tap, l_reg


def train(
    train_samples: Sequence[VideoSample],
    cfg: ExperimentConfig,
    out_dir: Path | None = None,
    resume: CheckpointBundle | None = None,
    epochs: int | None = None,
    progress: Callable[[int, dict, "AQAModel"], None] | None = None,
) -> TrainOutput:
    """Fit the full model on `train_samples`; returns model + epoch log."""
    tc = cfg.train
    if tc.threads is not None:
        torch.set_num_threads(tc.threads)
    device = torch.device(tc.device)

    by_type = _index_by_type(train_samples)
    thin = [t for t, idx in by_type.items() if len(idx) < 2]
    if thin:
        raise DataError(f"pairing requires >= 2 samples per action type; too few for {thin}")

    model = build_model(cfg.model, tc.seed).to(device)
    optimizer = build_optimizer(model, cfg)
    start_epoch = 0
    if resume is not None:
        if resume.config.config_hash() != cfg.config_hash():
            raise ConfigError("resume checkpoint was written under a different config")
        model.load_state_dict(resume.model_state)
        restore_optimizer(optimizer, model, resume)
        start_epoch = resume.epoch

    total_epochs = epochs if epochs is not None else tc.epochs
    n = len(train_samples)
    log_rows: list[dict] = []
    model.train()
    for epoch in range(start_epoch, total_epochs):
        rng = np.random.default_rng([tc.seed, epoch])
        order = rng.permutation(n)
        partner = np.empty(n, dtype=np.int64)
        for i in range(n):
            pool = by_type[train_samples[i].action_type]
            choices = [j for j in pool if j != i]
            partner[i] = choices[int(rng.integers(len(choices)))]

        sums = {"l_sap": 0.0, "l_tap": 0.0, "l_reg": 0.0, "total": 0.0}
        batches = 0
        for lo in range(0, n, tc.batch_size):
            idx = order[lo : lo + tc.batch_size]
            queries = [train_samples[int(i)] for i in idx]
            exemplars = [train_samples[int(partner[int(i)])] for i in idx]
            l_sap, l_tap, l_reg = _pair_losses(model, queries, exemplars, cfg, device)
            loss = losses.total_loss(l_sap, l_tap, l_reg)
            parts = {
                "l_sap": float(l_sap.detach()),
                "l_tap": float(l_tap.detach()),
                "l_reg": float(l_reg.detach()),
                "total": float(loss.detach()),
            }
            if not math.isfinite(parts["total"]):
                _dump_nan(out_dir, epoch, queries, *[parts[k] for k in ("l_sap", "l_tap", "l_reg")])
                raise TrainingError(f"non-finite loss at epoch {epoch}: {parts}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            for key, value in parts.items():
                sums[key] += value
            batches += 1

        row = {"epoch": epoch, **{k: v / max(batches, 1) for k, v in sums.items()}}
        log_rows.append(row)
        logger.info(
            "epoch %d: total %.4f (sap %.4f, tap %.4f, reg %.4f)",
            epoch, row["total"], row["l_sap"], row["l_tap"], row["l_reg"],
        )
        if progress is not None:
            progress(epoch, row, model)

    model.eval()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_training_log(out_dir / "training_log.csv", log_rows)
        save_checkpoint(out_dir / "checkpoint.aqck", model, cfg, total_epochs, optimizer)
    return TrainOutput(model, optimizer, log_rows, total_epochs)


def _dump_nan(out_dir, epoch, queries, l_sap, l_tap, l_reg) -> None:
    if out_dir is None:
        return
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    dump = {
        "epoch": epoch,
        "batch_sample_ids": [q.sample_id for q in queries],
        "l_sap": float(l_sap),
        "l_tap": float(l_tap),
        "l_reg": float(l_reg),
    }
    (Path(out_dir) / "nan_dump.json").write_text(json.dumps(dump, indent=2))


def write_training_log(path: Path, rows: Sequence[dict]) -> None:
    lines = [",".join(LOG_COLUMNS)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if c != "epoch" else str(row[c]) for c in LOG_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------
# inference engines + evaluation
# ----------------------------------------------------------------------


class ModelEngine:
    """Caches one parse per video so multi-exemplar voting is cheap."""

    def __init__(self, model: AQAModel, device=None):
        self.model = model.eval()
        self.device = device
        self._cache: dict[str, ParsedVideo] = {}

    def parsed(self, sample: VideoSample) -> ParsedVideo:
        hit = self._cache.get(sample.sample_id)
        if hit is None:
            with torch.no_grad():
                hit = self.model.parse(frames_to_tensor([sample], self.device))
            self._cache[sample.sample_id] = hit
        return hit

    def predict_pair(self, query: VideoSample, exemplar: VideoSample):
        from .finereg import assemble_score

        with torch.no_grad():
            relative = self.model.relative_pair_floats(self.parsed(query), self.parsed(exemplar))
        score = assemble_score(relative, self.model.cfg.lambdas, exemplar.score)
        return float(score), relative

    def predicted_transitions(self, sample: VideoSample) -> TransitionSet:
        return self.parsed(sample).transition_sets[0]

    def predicted_mask(self, sample: VideoSample) -> np.ndarray:
        fused = self.parsed(sample).pyramid.fused[0]
        return fused.detach().cpu().numpy()


class GroundTruthEngine:
    """Oracle plumbing fixture: predicts every target perfectly."""

    def predict_pair(self, query: VideoSample, exemplar: VideoSample):
        return float(query.score), ((0.0, 0.0),) * query.transition_set().num_steps

    def predicted_transitions(self, sample: VideoSample) -> TransitionSet:
        return sample.transition_set()

    def predicted_mask(self, sample: VideoSample) -> np.ndarray:
        return sample.masks.astype(np.float64)


def evaluate(
    engine,
    test_samples: Sequence[VideoSample],
    exemplar_pool: Sequence[VideoSample],
    eval_cfg: EvalConfig,
    collect_records: bool = False,
) -> metrics.MetricReport | tuple[metrics.MetricReport, list[PredictionRecord]]:
    """Score, parse, and mask every test sample; aggregate all six metrics."""
    if not test_samples:
        raise DataError("evaluation needs at least one test sample")
    rng = np.random.default_rng(eval_cfg.seed)
    mc = eval_cfg.metric_config()

    preds, gts, records = [], [], []
    pred_sets, gt_sets = [], []
    maes, fbetas, smeasures = [], [], []
    for sample in test_samples:
        exemplars = select_exemplars(sample, exemplar_pool, eval_cfg.exemplars, rng)
        record = predict_multi_exemplar(engine, sample, exemplars)
        preds.append(record.prediction)
        gts.append(sample.score)
        if collect_records:
            records.append(record)

        pred_sets.append(engine.predicted_transitions(sample))
        gt_sets.append(sample.transition_set())

        prob_mask = engine.predicted_mask(sample)
        gt_mask = sample.masks
        maes.append(metrics.mask_mae(prob_mask, gt_mask))
        hard = sap.binarize_mask(torch.from_numpy(prob_mask), mc.mask_threshold).numpy()
        fbetas.append(metrics.f_measure(hard, gt_mask, mc.beta2))
        smeasures.append(metrics.video_s_measure(prob_mask, gt_mask, mc.alpha))

    if mc.score_range is not None:
        y_min, y_max = mc.score_range
    else:
        y_min, y_max = float(np.min(gts)), float(np.max(gts))
    report = metrics.MetricReport(
        rho=metrics.spearman_rho(preds, gts),
        r_l2_x100=metrics.relative_l2(preds, gts, y_min, y_max),
        aiou={d: metrics.aiou_at(pred_sets, gt_sets, d) for d in mc.aiou_thresholds},
        mae=float(np.mean(maes)),
        f_beta=float(np.mean(fbetas)),
        s_measure=float(np.mean(smeasures)),
    )
    if collect_records:
        return report, records
    return report
