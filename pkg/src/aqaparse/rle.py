"""Run-length codec for binary masks.

Row-major scan; runs alternate between background (0) and foreground (1),
always starting with a background run, which may have length 0 when the
first pixel is foreground. The run lengths of a valid record sum to H*W.
"""

from __future__ import annotations

import numpy as np

from .errors import MaskCodecError


def rle_encode(mask: np.ndarray) -> list[int]:
    """Encode a 2-D binary mask into alternating run lengths."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise MaskCodecError(f"expected a 2-D mask, got shape {m.shape}")
    flat = m.reshape(-1)
    if flat.size == 0:
        return []
    if not np.isin(flat, (0, 1)).all():
        raise MaskCodecError("mask is not binary")
    flat = flat.astype(np.int64)
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [flat.size]))
    runs = (ends - starts).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs: list[int], height: int, width: int) -> np.ndarray:
    """Decode run lengths back into a [height, width] uint8 mask."""
    total = int(sum(runs))
    if total != height * width:
        raise MaskCodecError(
            f"run sum {total} != {height}*{width}={height * width}: corrupt record"
        )
    if any(r < 0 for r in runs):
        raise MaskCodecError("negative run length: corrupt record")
    out = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if value:
            out[pos : pos + run] = 1
        pos += run
        value = 1 - value
    return out.reshape(height, width)
