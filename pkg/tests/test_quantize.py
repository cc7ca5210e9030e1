"""Quality scaling goldens and hard quantization rounding."""

import numpy as np
import pytest

from jpegtune.codec import (
    IntQuantTablePair,
    QuantTablePair,
    default_tables,
    dequantize,
    quantize_hard,
    round_half_away,
    scale_table,
)
from jpegtune.codec.dct import CoeffPlanes

# Frozen from an independent oracle: direct evaluation of the scaling
# formula (s = 5000/q below 50 else 200-2q; round half away; clamp 1..255)
# on the Annex-K luma table.
# fmt: off
GOLD_LUMA_Q10 = [[80, 55, 50, 80, 120, 200, 255, 255],
    [60, 60, 70, 95, 130, 255, 255, 255],
    [70, 65, 80, 120, 200, 255, 255, 255],
    [70, 85, 110, 145, 255, 255, 255, 255],
    [90, 110, 185, 255, 255, 255, 255, 255],
    [120, 175, 255, 255, 255, 255, 255, 255],
    [245, 255, 255, 255, 255, 255, 255, 255],
    [255, 255, 255, 255, 255, 255, 255, 255]]
GOLD_LUMA_Q90 = [[3, 2, 2, 3, 5, 8, 10, 12],
    [2, 2, 3, 4, 5, 12, 12, 11],
    [3, 3, 3, 5, 8, 11, 14, 11],
    [3, 3, 4, 6, 10, 17, 16, 12],
    [4, 4, 7, 11, 14, 22, 21, 15],
    [5, 7, 11, 13, 16, 21, 23, 18],
    [10, 13, 16, 17, 21, 24, 24, 20],
    [14, 18, 19, 20, 22, 20, 21, 20]]
# fmt: on


def test_q50_is_identity_scaling():
    t = scale_table(default_tables(), 50)
    assert np.array_equal(t.luma, default_tables().luma.astype(int))
    assert np.array_equal(t.chroma, default_tables().chroma.astype(int))


def test_scale_examples():
    p = QuantTablePair(np.full((8, 8), 16.0), np.full((8, 8), 16.0))
    assert scale_table(p, 90).luma[0, 0] == 3  # 16 * 0.2 = 3.2 -> 3
    assert scale_table(p, 10).luma[0, 0] == 80  # 16 * 5 = 80


def test_golden_tables_q10_q50_q90():
    p = default_tables()
    assert np.array_equal(scale_table(p, 10).luma, np.array(GOLD_LUMA_Q10))
    assert np.array_equal(scale_table(p, 50).luma, p.luma.astype(int))
    assert np.array_equal(scale_table(p, 90).luma, np.array(GOLD_LUMA_Q90))


def test_q100_clamps_to_one():
    assert np.all(scale_table(default_tables(), 100).luma == 1)


def test_quality_out_of_range():
    for q in (0, 101, -4):
        with pytest.raises(ValueError):
            scale_table(default_tables(), q)


def _coeffs(value: float) -> CoeffPlanes:
    z = np.full((1, 1, 8, 8), float(value))
    return CoeffPlanes(z.copy(), z.copy(), z.copy(), "444", 8, 8)


def _tables(entry: int) -> IntQuantTablePair:
    return IntQuantTablePair(np.full((8, 8), entry), np.full((8, 8), entry))


def test_quantize_rounding_modes():
    t = _tables(16)
    assert np.all(quantize_hard(_coeffs(0.0), t).y == 0)
    assert np.all(quantize_hard(_coeffs(8.0), t).y == 1)  # round(0.5) half-away
    assert np.all(quantize_hard(_coeffs(-8.0), t).y == -1)


def test_dequantize_examples():
    t = _tables(16)
    assert np.all(dequantize(quantize_hard(_coeffs(0.0), t), t).y == 0)
    qc = _coeffs(0.0)
    qc.y[:] = 1
    assert np.all(dequantize(qc, t).y == 16)


def test_quantizer_bin_bound():
    rng = np.random.default_rng(8)
    d = rng.uniform(-1000, 1000, size=(3, 4, 8, 8))
    coeffs = CoeffPlanes(d, d.copy(), d.copy(), "444", 32, 24)
    t = IntQuantTablePair(rng.integers(1, 256, (8, 8)), rng.integers(1, 256, (8, 8)))
    back = dequantize(quantize_hard(coeffs, t), t)
    assert np.all(np.abs(back.y - d) <= t.luma / 2 + 1e-9)
    assert np.all(np.abs(back.cb - d) <= t.chroma / 2 + 1e-9)


def test_round_half_away_signs():
    assert round_half_away(0.5) == 1
    assert round_half_away(-0.5) == -1
    assert round_half_away(2.49) == 2
    assert round_half_away(-2.5) == -3
    assert np.array_equal(round_half_away(np.array([1.5, -1.5])), [2, -2])


def test_table_validation():
    with pytest.raises(ValueError):
        IntQuantTablePair(np.zeros((8, 8)), np.ones((8, 8)))
    with pytest.raises(ValueError):
        IntQuantTablePair(np.full((8, 8), 256), np.ones((8, 8)))
    with pytest.raises(ValueError):
        QuantTablePair(np.zeros((8, 8)), np.ones((8, 8)))
    with pytest.raises(ValueError):
        QuantTablePair(np.ones((4, 4)), np.ones((8, 8)))
