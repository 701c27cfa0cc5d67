import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqaparse.errors import MaskCodecError
from aqaparse.rle import rle_decode, rle_encode


def test_all_zero_mask():
    assert rle_encode(np.zeros((2, 2), dtype=np.uint8)) == [4]


def test_all_one_mask():
    assert rle_encode(np.ones((2, 2), dtype=np.uint8)) == [0, 4]


def test_mixed_mask_row_major():
    mask = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    assert rle_encode(mask) == [0, 1, 2, 1]


def test_roundtrip_random_masks():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        mask = (rng.random((8, 8)) < rng.random()).astype(np.uint8)
        runs = rle_encode(mask)
        assert sum(runs) == 64
        assert np.array_equal(rle_decode(runs, 8, 8), mask)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.data())
@settings(max_examples=200, deadline=None)
def test_roundtrip_property(bits, data):
    width = data.draw(st.sampled_from([d for d in range(1, len(bits) + 1) if len(bits) % d == 0]))
    mask = np.array(bits, dtype=np.uint8).reshape(-1, width)
    assert np.array_equal(rle_decode(rle_encode(mask), *mask.shape), mask)


def test_decode_rejects_bad_sum():
    with pytest.raises(MaskCodecError, match="corrupt"):
        rle_decode([3], 2, 2)


def test_encode_rejects_nonbinary():
    with pytest.raises(MaskCodecError):
        rle_encode(np.array([[0, 2]]))


def test_empty_mask():
    assert rle_encode(np.zeros((0, 0), dtype=np.uint8)) == []
    assert rle_decode([], 0, 0).shape == (0, 0)
