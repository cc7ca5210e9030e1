"""Quantization tables, quality scaling, and hard (de)quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dct import CoeffPlanes

# Annex-K reference tables (the ubiquitous "default" JPEG tables).
# fmt: off
DEFAULT_LUMA = np.array([
    [16,  11,  10,  16,  24,  40,  51,  61],
    [12,  12,  14,  19,  26,  58,  60,  55],
    [14,  13,  16,  24,  40,  57,  69,  56],
    [14,  17,  22,  29,  51,  87,  80,  62],
    [18,  22,  37,  56,  68, 109, 103,  77],
    [24,  35,  55,  64,  81, 104, 113,  92],
    [49,  64,  78,  87, 103, 121, 120, 101],
    [72,  92,  95,  98, 112, 100, 103,  99],
], dtype=np.float64)

DEFAULT_CHROMA = np.array([
    [17,  18,  24,  47,  99,  99,  99,  99],
    [18,  21,  26,  66,  99,  99,  99,  99],
    [24,  26,  56,  99,  99,  99,  99,  99],
    [47,  66,  99,  99,  99,  99,  99,  99],
    [99,  99,  99,  99,  99,  99,  99,  99],
    [99,  99,  99,  99,  99,  99,  99,  99],
    [99,  99,  99,  99,  99,  99,  99,  99],
    [99,  99,  99,  99,  99,  99,  99,  99],
], dtype=np.float64)
# fmt: on


@dataclass
class QuantTablePair:
    """A luma/chroma pair of 8x8 tables.

    Real-valued entries (>= 1) during optimization; `round_clip()` produces
    the integer pair actually fed to the encoder.
    """

    luma: np.ndarray
    chroma: np.ndarray

    def __post_init__(self):
        self.luma = np.asarray(self.luma, dtype=np.float64)
        self.chroma = np.asarray(self.chroma, dtype=np.float64)
        for name, t in (("luma", self.luma), ("chroma", self.chroma)):
            if t.shape != (8, 8):
                raise ValueError(f"{name} table must be 8x8, got {t.shape}")
            if np.any(t <= 0):
                raise ValueError(f"{name} table entries must be positive")

    def copy(self) -> "QuantTablePair":
        return QuantTablePair(self.luma.copy(), self.chroma.copy())


@dataclass
class IntQuantTablePair:
    """Integer tables with entries in {1, ..., 255}."""

    luma: np.ndarray
    chroma: np.ndarray

    def __post_init__(self):
        self.luma = np.asarray(self.luma, dtype=np.int64)
        self.chroma = np.asarray(self.chroma, dtype=np.int64)
        for name, t in (("luma", self.luma), ("chroma", self.chroma)):
            if t.shape != (8, 8):
                raise ValueError(f"{name} table must be 8x8, got {t.shape}")
            if np.any(t < 1) or np.any(t > 255):
                raise ValueError(f"{name} entries must lie in 1..255")

    def table_for(self, channel: str) -> np.ndarray:
        return self.luma if channel == "y" else self.chroma


def default_tables() -> QuantTablePair:
    return QuantTablePair(DEFAULT_LUMA.copy(), DEFAULT_CHROMA.copy())


def round_half_away(x):
    """Round to nearest with halves away from zero (JPEG convention)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quality_scale(q: int) -> float:
    """Conventional quality-factor multiplier, in percent."""
    if not 1 <= q <= 100 or int(q) != q:
        raise ValueError(f"quality factor must be an integer in [1, 100], got {q}")
    q = int(q)
    return 5000.0 / q if q < 50 else 200.0 - 2.0 * q


def scale_table(p: QuantTablePair, q: int) -> IntQuantTablePair:
    """Scale real tables by quality, then round and clip to {1, ..., 255}."""
    s = quality_scale(q) / 100.0
    luma = np.clip(round_half_away(p.luma * s), 1, 255)
    chroma = np.clip(round_half_away(p.chroma * s), 1, 255)
    return IntQuantTablePair(luma, chroma)


def quantize_hard(coeffs: CoeffPlanes, t: IntQuantTablePair) -> CoeffPlanes:
    """Divide by the table and round half-away; result holds integers."""
    luma = t.luma.astype(np.float64)
    chroma = t.chroma.astype(np.float64)
    y = round_half_away(coeffs.y / luma).astype(np.int64)
    cb = round_half_away(coeffs.cb / chroma).astype(np.int64)
    cr = round_half_away(coeffs.cr / chroma).astype(np.int64)
    return CoeffPlanes(y, cb, cr, coeffs.layout, coeffs.width, coeffs.height)


def dequantize(qcoeffs: CoeffPlanes, t: IntQuantTablePair) -> CoeffPlanes:
    y = qcoeffs.y * t.luma.astype(np.float64)
    cb = qcoeffs.cb * t.chroma.astype(np.float64)
    cr = qcoeffs.cr * t.chroma.astype(np.float64)
    return CoeffPlanes(y, cb, cr, qcoeffs.layout, qcoeffs.width, qcoeffs.height)
