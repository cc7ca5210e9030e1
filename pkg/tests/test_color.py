"""Color conversion: affine map values, round-trip accuracy."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jpegtune.codec import rgb_to_ycbcr, validate_rgb, ycbcr_to_rgb
from jpegtune.codec.color import RGB_TO_YCBCR, YCBCR_OFFSET, YcbcrImage


def _single(r, g, b):
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    img[:, :] = (r, g, b)
    ycc = rgb_to_ycbcr(img)
    return ycc.y[0, 0], ycc.cb[0, 0], ycc.cr[0, 0]


def test_black_maps_to_zero_luma_neutral_chroma():
    assert _single(0, 0, 0) == (0.0, 128.0, 128.0)


def test_white_luma_coefficients_sum_to_one():
    y, cb, cr = _single(255, 255, 255)
    assert abs(y - 255.0) < 1e-9
    assert abs(cb - 128.0) < 1e-9 and abs(cr - 128.0) < 1e-9


def test_pure_red_matches_direct_affine_evaluation():
    # oracle: evaluate the affine map coefficients directly
    expect = RGB_TO_YCBCR @ np.array([255.0, 0.0, 0.0]) + YCBCR_OFFSET
    y, cb, cr = _single(255, 0, 0)
    assert abs(y - expect[0]) < 1e-9
    assert abs(cb - expect[1]) < 1e-9
    assert abs(cr - expect[2]) < 1e-9
    assert abs(y - 76.245) < 1e-3  # 0.299 * 255
    assert abs(cb - 84.9723) < 1e-3
    assert abs(cr - 255.5) < 1e-9  # clamped later by the 8-bit conversion


def test_inverse_of_white_and_black():
    ones = np.ones((16, 16))
    img = YcbcrImage(255.0 * ones, 128.0 * ones, 128.0 * ones, "444", 16, 16)
    assert np.all(ycbcr_to_rgb(img) == 255)
    img = YcbcrImage(0.0 * ones, 128.0 * ones, 128.0 * ones, "444", 16, 16)
    assert np.all(ycbcr_to_rgb(img) == 0)


def test_round_trip_error_at_most_one_on_random_sample():
    rng = np.random.default_rng(0)
    # random sample oracle over the RGB cube, plus the corners
    flat = rng.integers(0, 256, size=(200_000, 3), dtype=np.uint8)
    corners = np.array(np.meshgrid([0, 255], [0, 255], [0, 255])).T.reshape(-1, 3)
    flat = np.concatenate([flat, corners.astype(np.uint8)])
    side = 452  # 452^2 > 200008
    img = np.zeros((side, side, 3), dtype=np.uint8)
    img.reshape(-1, 3)[: len(flat)] = flat
    back = ycbcr_to_rgb(rgb_to_ycbcr(img))
    err = np.abs(back.astype(int) - img.astype(int))
    assert err.max() <= 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
def test_round_trip_property(r, g, b):
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    img[:, :] = (r, g, b)
    back = ycbcr_to_rgb(rgb_to_ycbcr(img))
    assert np.abs(back[0, 0].astype(int) - np.array([r, g, b])).max() <= 1


def test_validate_rgb_rejects_bad_shapes_and_sizes():
    with pytest.raises(ValueError):
        validate_rgb(np.zeros((16, 16), dtype=np.uint8))
    with pytest.raises(ValueError):
        validate_rgb(np.zeros((8, 16, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        validate_rgb(np.full((16, 16, 3), 300.0))
