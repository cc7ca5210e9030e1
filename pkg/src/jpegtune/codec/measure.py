"""End-to-end encode/decode and rate/distortion measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .color import YcbcrImage, downsample_420, rgb_to_ycbcr, upsample_420, ycbcr_to_rgb, ycbcr_to_rgb_real
from .dct import CoeffPlanes, fdct_image, idct_image
from .huffman import BitStats
from .jfif import JpegFile, read_jfif, write_jfif
from .quantize import IntQuantTablePair, QuantTablePair, dequantize, quantize_hard, scale_table

PSNR_CSV_CAP = 99.0  # sentinel cap applied when rendering infinite PSNR


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(255^2 / MSE) over all RGB samples; +inf when identical."""
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def forward_to_quantized(img: np.ndarray, tables: IntQuantTablePair, layout: str) -> CoeffPlanes:
    """Color-convert, subsample, transform, and hard-quantize an RGB image."""
    ycc = rgb_to_ycbcr(img)
    if layout == "420":
        ycc = downsample_420(ycc)
    coeffs = fdct_image(ycc)
    return quantize_hard(coeffs, tables)


def reconstruct_real(qcoeffs: CoeffPlanes, tables: IntQuantTablePair) -> np.ndarray:
    """Decode quantized coefficients to an unclamped float RGB image."""
    ycc = idct_image(dequantize(qcoeffs, tables))
    if qcoeffs.layout == "420":
        ycc = upsample_420(ycc)
    return ycbcr_to_rgb_real(ycc)


def reconstruct(qcoeffs: CoeffPlanes, tables: IntQuantTablePair) -> np.ndarray:
    ycc = idct_image(dequantize(qcoeffs, tables))
    if qcoeffs.layout == "420":
        ycc = upsample_420(ycc)
    return ycbcr_to_rgb(ycc)


def encode_jpeg(img: np.ndarray, tables: IntQuantTablePair, layout: str = "420") -> tuple[bytes, BitStats]:
    """Compress an RGB image to JFIF bytes with the given integer tables."""
    return write_jfif(tables, layout, forward_to_quantized(img, tables, layout))


def decode_jpeg(data: bytes) -> np.ndarray:
    """Decode JFIF bytes (produced by this codec) to an RGB image."""
    f = read_jfif(data)
    return reconstruct(f.qcoeffs, f.tables)


@dataclass
class MeasureResult:
    bpp: float
    psnr: float
    data: bytes
    stats: BitStats
    reconstruction: np.ndarray  # uint8 RGB
    qcoeffs: CoeffPlanes
    tables: IntQuantTablePair


def encode_measure(img: np.ndarray, p: QuantTablePair, q: int, layout: str = "420") -> MeasureResult:
    """Run the full hard pipeline and report actual bpp and PSNR.

    The reconstruction comes from the dequantize/inverse path directly;
    entropy coding is lossless, so this equals the bitstream decode.
    """
    tables = scale_table(p, q)
    qcoeffs = forward_to_quantized(img, tables, layout)
    data, stats = write_jfif(tables, layout, qcoeffs)
    recon_real = reconstruct_real(qcoeffs, tables)
    recon = np.clip(np.floor(recon_real + 0.5), 0, 255).astype(np.uint8)
    h, w = img.shape[:2]
    bpp = len(data) * 8.0 / (w * h)
    return MeasureResult(bpp, psnr(img, recon), data, stats, recon, qcoeffs, tables)
