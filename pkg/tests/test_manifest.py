import json

import numpy as np
import pytest
from PIL import Image

from aqaparse.errors import ManifestError
from aqaparse.manifest import (
    corpus_content_hash,
    export_mask_images,
    load_annotations,
    read_packed_frames,
    save_corpus,
    write_packed_frames,
)
from aqaparse.rle import rle_encode
from aqaparse.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="module")
def corpus():
    cfg = SyntheticConfig(
        count=4, frames=32, height=16, width=16, seed=2,
        semi_major_range=(3.0, 4.0), semi_minor_range=(1.2, 1.8),
    )
    return generate_synthetic(cfg)


def test_packed_frames_roundtrip(tmp_path, corpus):
    path = tmp_path / "a.fpv"
    write_packed_frames(path, corpus[0].frames)
    loaded = read_packed_frames(path)
    assert np.array_equal(loaded, corpus[0].frames)
    assert path.read_bytes()[:4] == b"FPV1"


def test_packed_frames_header(tmp_path):
    path = tmp_path / "b.fpv"
    path.write_bytes(b"JUNK" + b"\x00" * 20)
    with pytest.raises(ManifestError, match="not a packed frame file"):
        read_packed_frames(path)


def test_corpus_roundtrip(tmp_path, corpus):
    save_corpus(corpus, tmp_path)
    loaded, skipped = load_annotations(tmp_path)
    assert not skipped
    assert len(loaded) == len(corpus)
    for a, b in zip(corpus, loaded):
        assert a.sample_id == b.sample_id
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.masks, b.masks)
        assert a.transitions == b.transitions
        assert a.score == b.score and a.action_type == b.action_type


def test_empty_manifest(tmp_path):
    (tmp_path / "manifest.jsonl").write_text("")
    samples, skipped = load_annotations(tmp_path)
    assert samples == [] and skipped == []


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestError, match="manifest not found"):
        load_annotations(tmp_path)


def test_malformed_line_is_fatal_with_lineno(tmp_path, corpus):
    save_corpus(corpus[:1], tmp_path)
    with open(tmp_path / "manifest.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(ManifestError, match=r"manifest\.jsonl:2"):
        load_annotations(tmp_path)


def test_missing_field_is_fatal(tmp_path):
    (tmp_path / "manifest.jsonl").write_text(json.dumps({"id": "x", "frames": "f"}) + "\n")
    with pytest.raises(ManifestError, match="missing fields"):
        load_annotations(tmp_path)


def test_non_monotone_transitions_skipped_with_reason(tmp_path, corpus, caplog):
    save_corpus(corpus[:1], tmp_path)
    manifest = tmp_path / "manifest.jsonl"
    record = json.loads(manifest.read_text())
    record["transitions"] = [20, 20]
    manifest.write_text(json.dumps(record) + "\n")
    with caplog.at_level("WARNING"):
        samples, skipped = load_annotations(tmp_path)
    assert samples == []
    assert len(skipped) == 1
    assert "not increasing" in skipped[0].reason


def test_missing_frames_file_skips_sample(tmp_path, corpus):
    save_corpus(corpus[:2], tmp_path)
    (tmp_path / "frames" / f"{corpus[0].sample_id}.fpv").unlink()
    samples, skipped = load_annotations(tmp_path)
    assert [s.sample_id for s in samples] == [corpus[1].sample_id]
    assert skipped[0].sample_id == corpus[0].sample_id


def test_mask_directory_input(tmp_path, corpus):
    sample = corpus[0]
    save_corpus([sample], tmp_path)
    mask_dir = tmp_path / "maskdir"
    export_mask_images(sample.masks, mask_dir)
    manifest = tmp_path / "manifest.jsonl"
    record = json.loads(manifest.read_text())
    record["masks"] = "maskdir"
    manifest.write_text(json.dumps(record) + "\n")
    loaded, skipped = load_annotations(tmp_path)
    assert not skipped
    assert np.array_equal(loaded[0].masks, sample.masks)


def test_missing_mask_frame_skips(tmp_path, corpus):
    sample = corpus[0]
    save_corpus([sample], tmp_path)
    mask_dir = tmp_path / "maskdir"
    export_mask_images(sample.masks[:-1], mask_dir)  # one frame short
    manifest = tmp_path / "manifest.jsonl"
    record = json.loads(manifest.read_text())
    record["masks"] = "maskdir"
    manifest.write_text(json.dumps(record) + "\n")
    loaded, skipped = load_annotations(tmp_path)
    assert loaded == []
    assert "missing mask frame" in skipped[0].reason


def test_frames_directory_input(tmp_path, corpus):
    sample = corpus[0]
    frame_dir = tmp_path / "framedir"
    frame_dir.mkdir()
    for i, frame in enumerate(sample.frames):
        arr = np.round(frame * 255).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(frame_dir / f"{i:04d}.png")
    record = {
        "id": sample.sample_id,
        "frames": "framedir",
        "masks": [rle_encode(m) for m in sample.masks],
        "action_type": sample.action_type,
        "difficulty": sample.difficulty,
        "score": sample.score,
        "transitions": list(sample.transitions),
    }
    (tmp_path / "manifest.jsonl").write_text(json.dumps(record) + "\n")
    loaded, skipped = load_annotations(tmp_path)
    assert not skipped
    assert np.array_equal(loaded[0].frames, sample.frames)


def test_content_hash_replay(tmp_path, corpus):
    d1, d2 = tmp_path / "one", tmp_path / "two"
    save_corpus(corpus, d1)
    save_corpus(corpus, d2)
    assert corpus_content_hash(d1) == corpus_content_hash(d2)
    save_corpus(corpus[:2], tmp_path / "three")
    assert corpus_content_hash(tmp_path / "three") != corpus_content_hash(d1)
