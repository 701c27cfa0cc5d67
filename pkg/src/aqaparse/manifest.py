"""Corpus on-disk formats: packed frame files, JSON-lines manifests, masks.

Manifest: one JSON object per line with fields
  {"id", "frames", "masks", "action_type", "difficulty", "score", "transitions"}
where "frames" is a path (relative to the corpus root) to either a packed
frame file or a directory of numbered images, and "masks" is either a list
of per-frame RLE run arrays or a path to a directory of per-frame images.

Packed frame file: 16-byte header {magic "FPV1", T, H, W as little-endian
int32} followed by uint8 pixel data in [T, H, W, 3] C order (value = round
of 255 * intensity).
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .data import VideoSample
from .errors import DataError, ManifestError
from .rle import rle_decode, rle_encode

logger = logging.getLogger(__name__)

FRAMES_MAGIC = b"FPV1"
MANIFEST_NAME = "manifest.jsonl"


def write_packed_frames(path: Path, frames: np.ndarray) -> None:
    """Write float [T,H,W,3] frames in [0,1] as a packed uint8 file."""
    t, h, w, c = frames.shape
    if c != 3:
        raise DataError(f"expected 3 channels, got {c}")
    payload = np.round(np.asarray(frames, dtype=np.float32) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(FRAMES_MAGIC + struct.pack("<iii", t, h, w))
        fh.write(payload.tobytes(order="C"))


def read_packed_frames(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != FRAMES_MAGIC:
            raise ManifestError(f"{path}: not a packed frame file")
        t, h, w = struct.unpack("<iii", header[4:])
        data = fh.read()
    expected = t * h * w * 3
    if len(data) != expected:
        raise ManifestError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(t, h, w, 3)
    return pixels.astype(np.float32) / 255.0


def _read_image_dir(path: Path, grayscale: bool) -> np.ndarray:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise FileNotFoundError(f"no image frames in {path}")
    layers = []
    for p in files:
        img = Image.open(p).convert("L" if grayscale else "RGB")
        layers.append(np.asarray(img))
    return np.stack(layers)


def load_frames(root: Path, spec: str) -> np.ndarray:
    path = root / spec
    if path.is_dir():
        return _read_image_dir(path, grayscale=False).astype(np.float32) / 255.0
    if not path.exists():
        raise FileNotFoundError(f"frames not found: {path}")
    return read_packed_frames(path)


def load_masks(root: Path, spec, num_frames: int, height: int, width: int) -> np.ndarray:
    """Masks from inline RLE arrays or a directory of per-frame images."""
    if isinstance(spec, str):
        path = root / spec
        if not path.is_dir():
            raise FileNotFoundError(f"mask directory not found: {path}")
        imgs = _read_image_dir(path, grayscale=True)
        if imgs.shape[0] != num_frames:
            raise FileNotFoundError(
                f"missing mask frame: {path} has {imgs.shape[0]} of {num_frames}"
            )
        return (imgs > 127).astype(np.uint8)
    if not isinstance(spec, list) or len(spec) != num_frames:
        raise DataError(
            f"masks must list one RLE record per frame ({num_frames}), got "
            f"{len(spec) if isinstance(spec, list) else type(spec).__name__}"
        )
    return np.stack([rle_decode(runs, height, width) for runs in spec])


def save_corpus(samples: Sequence[VideoSample], out_dir: Path) -> Path:
    """Write frames + manifest under out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for sample in samples:
            rel = f"frames/{sample.sample_id}.fpv"
            write_packed_frames(out_dir / rel, sample.frames)
            record = {
                "id": sample.sample_id,
                "frames": rel,
                "masks": [rle_encode(m) for m in sample.masks],
                "action_type": sample.action_type,
                "difficulty": sample.difficulty,
                "score": sample.score,
                "transitions": list(sample.transitions),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path


@dataclass(frozen=True)
class SkipRecord:
    line: int
    sample_id: str
    reason: str


_REQUIRED_FIELDS = ("frames", "masks", "action_type", "difficulty", "score", "transitions")


def load_annotations(
    root: Path, manifest: Path | None = None
) -> tuple[list[VideoSample], list[SkipRecord]]:
    """Load a corpus, returning validated samples plus per-sample skips.

    Malformed JSON or missing required fields is fatal (ManifestError with
    the line number); invariant violations and missing files skip just that
    sample with a logged reason.
    """
    root = Path(root)
    manifest = Path(manifest) if manifest else root / MANIFEST_NAME
    if not manifest.exists():
        raise ManifestError(f"manifest not found: {manifest}")
    samples: list[VideoSample] = []
    skipped: list[SkipRecord] = []
    with open(manifest, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{manifest}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ManifestError(f"{manifest}:{lineno}: entry is not an object")
            missing = [k for k in _REQUIRED_FIELDS if k not in record]
            if missing:
                raise ManifestError(f"{manifest}:{lineno}: missing fields {missing}")
            sample_id = str(record.get("id", f"line-{lineno}"))
            try:
                frames = load_frames(root, record["frames"])
                masks = load_masks(
                    root, record["masks"], frames.shape[0], frames.shape[1], frames.shape[2]
                )
                sample = VideoSample(
                    sample_id=sample_id,
                    frames=frames,
                    masks=masks,
                    action_type=str(record["action_type"]),
                    difficulty=float(record["difficulty"]),
                    score=float(record["score"]),
                    transitions=tuple(record["transitions"]),
                )
            except (DataError, FileNotFoundError, OSError) as exc:
                logger.warning("skipping sample %s (line %d): %s", sample_id, lineno, exc)
                skipped.append(SkipRecord(lineno, sample_id, str(exc)))
                continue
            samples.append(sample)
    return samples, skipped


def corpus_content_hash(root: Path) -> str:
    """SHA-256 over the manifest and every frame file, in sorted path order."""
    root = Path(root)
    digest = hashlib.sha256()
    paths = [root / MANIFEST_NAME]
    if (root / "frames").is_dir():
        paths.extend(sorted((root / "frames").glob("*")))
    for path in paths:
        if path.exists():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def export_mask_images(masks: np.ndarray, out_dir: Path) -> list[Path]:
    """Write per-frame masks as 0/255 grayscale PNGs named 0000.png, ..."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, m in enumerate(masks):
        p = out_dir / f"{i:04d}.png"
        Image.fromarray((np.asarray(m) > 0).astype(np.uint8) * 255, mode="L").save(p)
        paths.append(p)
    return paths
