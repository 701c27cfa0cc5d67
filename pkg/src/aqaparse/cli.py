"""Batch command-line surface: generate / train / evaluate / predict / export-masks.

Every command validates the full config before any compute, writes a
run_manifest.json next to its outputs, exits 0 on success, and on failure
prints a machine-readable JSON error record to stderr and exits nonzero
(2 for validation problems, 1 for runtime failures). Flags can also come
from environment variables with the AQAPARSE_ prefix (e.g. AQAPARSE_SEED).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import AqaError, ConfigError, DataError
from .manifest import corpus_content_hash, export_mask_images, load_annotations, save_corpus
from .synthetic import generate_synthetic

ENV_PREFIX = "AQAPARSE_"

logger = logging.getLogger(__name__)


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _env_int(name: str):
    raw = _env(name)
    return int(raw) if raw is not None else None


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_run_manifest(out_dir: Path, command: str, args: argparse.Namespace, inputs: dict) -> None:
    manifest = {
        "command": command,
        "config": str(args.config) if getattr(args, "config", None) else None,
        "seed": getattr(args, "seed", None),
        "out": str(out_dir),
        "input_hashes": inputs,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _prepare_out(out: Path, force: bool) -> Path:
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(
            cfg,
            synthetic=dataclasses.replace(cfg.synthetic, seed=args.seed),
            train=dataclasses.replace(cfg.train, seed=args.seed),
        )
    if getattr(args, "exemplars", None) is not None:
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, exemplars=args.exemplars))
    if getattr(args, "device", None):
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, device=args.device))
    cfg.validate()
    return cfg


def _input_hashes(args) -> dict:
    hashes = {}
    if getattr(args, "config", None):
        hashes["config"] = _file_hash(args.config)
    if getattr(args, "data", None):
        hashes["corpus"] = corpus_content_hash(Path(args.data))
    if getattr(args, "checkpoint", None):
        hashes["checkpoint"] = _file_hash(args.checkpoint)
    return hashes


def _load_corpus(data_dir: Path):
    samples, skipped = load_annotations(Path(data_dir))
    for rec in skipped:
        logger.warning("skipped %s (line %d): %s", rec.sample_id, rec.line, rec.reason)
    if not samples:
        raise DataError(f"corpus at {data_dir} contains no valid samples")
    return samples


def _split(samples, cfg: ExperimentConfig):
    from .data import split_train_test

    return split_train_test(samples, cfg.train.split_seed, cfg.train.train_fraction)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_experiment(args)
    out = _prepare_out(args.out, args.force)
    samples = generate_synthetic(cfg.synthetic)
    save_corpus(samples, out)
    inputs = _input_hashes(args)
    inputs["corpus"] = corpus_content_hash(out)
    write_run_manifest(out, "generate", args, inputs)
    print(json.dumps({"generated": len(samples), "out": str(out), "hash": inputs["corpus"]}))
    return 0


def cmd_train(args) -> int:
    from .trainer import train

    cfg = _load_experiment(args)
    out = _prepare_out(args.out, args.force)
    samples = _load_corpus(args.data)
    train_set, _ = _split(samples, cfg)
    epochs = args.epochs if args.epochs is not None else None
    result = train(train_set, cfg, out_dir=out, epochs=epochs)
    write_run_manifest(out, "train", args, _input_hashes(args))
    print(
        json.dumps(
            {
                "epochs": result.final_epoch,
                "final_loss": result.log_rows[-1]["total"] if result.log_rows else None,
                "checkpoint": str(out / "checkpoint.aqck"),
            }
        )
    )
    return 0


def cmd_evaluate(args) -> int:
    from .checkpoint import load_checkpoint
    from .trainer import GroundTruthEngine, ModelEngine, evaluate

    out = _prepare_out(args.out, args.force)
    if args.oracle_fixture:
        cfg = _load_experiment(args)
        engine = GroundTruthEngine()
    else:
        if not args.checkpoint:
            raise ConfigError("evaluate needs --checkpoint (or --oracle-fixture)")
        bundle = load_checkpoint(Path(args.checkpoint))
        cfg = bundle.config
        if args.exemplars is not None:
            cfg = dataclasses.replace(
                cfg, eval=dataclasses.replace(cfg.eval, exemplars=args.exemplars)
            )
        cfg.validate()
        engine = ModelEngine(bundle.build_model())
    samples = _load_corpus(args.data)
    train_set, test_set = _split(samples, cfg)
    report = evaluate(engine, test_set, train_set, cfg.eval)
    (out / "metric_report.json").write_text(report.to_json() + "\n")
    write_run_manifest(out, "evaluate", args, _input_hashes(args))
    print(report.to_json())
    return 0


def cmd_predict(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import select_exemplars
    from .finereg import predict_multi_exemplar
    from .trainer import ModelEngine

    bundle = load_checkpoint(Path(args.checkpoint))
    cfg = bundle.config
    if args.exemplars is not None:
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, exemplars=args.exemplars))
    cfg.validate()
    samples = _load_corpus(args.data)
    by_id = {s.sample_id: s for s in samples}
    if args.sample not in by_id:
        raise DataError(f"sample {args.sample!r} not found in corpus")
    query = by_id[args.sample]
    train_set, _ = _split(samples, cfg)
    pool = [s for s in train_set if s.sample_id != query.sample_id]
    import numpy as np

    exemplars = select_exemplars(query, pool, cfg.eval.exemplars, np.random.default_rng(cfg.eval.seed))
    engine = ModelEngine(bundle.build_model())
    record = predict_multi_exemplar(engine, query, exemplars)
    out = _prepare_out(args.out, args.force)
    with open(out / "predictions.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    write_run_manifest(out, "predict", args, _input_hashes(args))
    print(json.dumps(record.to_dict(), sort_keys=True))
    return 0


def cmd_export_masks(args) -> int:
    import torch

    from .checkpoint import load_checkpoint
    from .sap import binarize_mask
    from .trainer import ModelEngine

    bundle = load_checkpoint(Path(args.checkpoint))
    samples = _load_corpus(args.data)
    engine = ModelEngine(bundle.build_model())
    out = _prepare_out(args.out, args.force)
    threshold = bundle.config.eval.mask_threshold
    for sample in samples:
        prob = engine.predicted_mask(sample)
        hard = binarize_mask(torch.from_numpy(prob), threshold).numpy()
        export_mask_images(hard, out / sample.sample_id)
        engine._cache.clear()  # videos are independent; keep memory flat
    write_run_manifest(out, "export-masks", args, _input_hashes(args))
    print(json.dumps({"exported": len(samples), "out": str(out)}))
    return 0


# ----------------------------------------------------------------------
# argument plumbing
# ----------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser, *, config=True, data=False, checkpoint=False):
    if config:
        default = _env("config")
        sub.add_argument("--config", type=Path, default=Path(default) if default else None,
                         help="experiment config JSON (defaults used when omitted)")
    sub.add_argument("--out", type=Path, required=_env("out") is None,
                     default=Path(_env("out")) if _env("out") else None,
                     help="output directory")
    sub.add_argument("--seed", type=int, default=_env_int("seed"),
                     help="override corpus/train seeds")
    sub.add_argument("--force", action="store_true", help="allow writing into a non-empty directory")
    if data:
        sub.add_argument("--data", type=Path, required=_env("data") is None,
                         default=Path(_env("data")) if _env("data") else None,
                         help="corpus directory (contains manifest.jsonl)")
    if checkpoint:
        sub.add_argument("--checkpoint", type=Path,
                         default=Path(_env("checkpoint")) if _env("checkpoint") else None,
                         help="checkpoint file")
    sub.add_argument("--exemplars", type=int, default=_env_int("exemplars"),
                     help="number of voting exemplars E")
    sub.add_argument("--device", default=_env("device"), help="torch device (default cpu)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqaparse",
        description="Action quality assessment via spatial-temporal action parsing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a synthetic corpus to disk")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train on the 75% split of a corpus")
    _add_common(p, data=True)
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="full metric report on the held-out 25%")
    _add_common(p, data=True, checkpoint=True)
    p.add_argument("--oracle-fixture", action="store_true",
                   help="plumbing check: evaluate ground truth against itself")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score one sample against the exemplar pool")
    _add_common(p, data=True, checkpoint=True)
    p.add_argument("--sample", required=True, help="sample id to score")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-masks", help="write predicted masks as PNG frames")
    _add_common(p, data=True, checkpoint=True)
    p.set_defaults(func=cmd_export_masks)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except AqaError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
