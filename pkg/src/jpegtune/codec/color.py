"""Color conversion and chroma resampling for the JPEG pipeline.

All operations work on float64 arrays and are linear (or affine), so the
same routines serve both the reference codec and the differentiable proxy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# BT.601 full-range RGB -> YCbCr, rows are (Y, Cb, Cr)
RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
YCBCR_OFFSET = np.array([0.0, 128.0, 128.0])
YCBCR_TO_RGB = np.linalg.inv(RGB_TO_YCBCR)


@dataclass
class YcbcrImage:
    """Planar YCbCr image; chroma may be 2x-subsampled (layout "420").

    Planes are float64 and conceptually live in [0, 255]; values are not
    clamped here so gradient-carrying intermediates pass through unchanged.
    `width`/`height` are the full-resolution (luma) dimensions.
    """

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    layout: str  # "444" or "420"
    width: int
    height: int

    def chroma_size(self) -> tuple[int, int]:
        if self.layout == "444":
            return self.height, self.width
        return (self.height + 1) // 2, (self.width + 1) // 2


def validate_rgb(img: np.ndarray) -> np.ndarray:
    """Check an RGB image array: (H, W, 3), 8-bit range, at least 16x16."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB array, got shape {img.shape}")
    if img.shape[0] < 16 or img.shape[1] < 16:
        raise ValueError(f"image must be at least 16x16, got {img.shape[1]}x{img.shape[0]}")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise ValueError("sample values outside [0, 255]")
    return img


def rgb_to_ycbcr(img: np.ndarray) -> YcbcrImage:
    """Convert an RGB image (H, W, 3) to full-resolution YCbCr planes."""
    img = validate_rgb(img)
    arr = img.astype(np.float64)
    ycc = arr @ RGB_TO_YCBCR.T + YCBCR_OFFSET
    h, w = img.shape[:2]
    return YcbcrImage(ycc[:, :, 0], ycc[:, :, 1], ycc[:, :, 2], "444", w, h)


def ycbcr_to_rgb_real(img: YcbcrImage) -> np.ndarray:
    """Inverse color transform, returned as unclamped float64 (H, W, 3)."""
    if img.layout != "444":
        raise ValueError("ycbcr_to_rgb expects layout 444; upsample first")
    ycc = np.stack([img.y, img.cb, img.cr], axis=-1)
    return (ycc - YCBCR_OFFSET) @ YCBCR_TO_RGB.T


def ycbcr_to_rgb(img: YcbcrImage) -> np.ndarray:
    """Inverse color transform, clamped and rounded to uint8."""
    real = ycbcr_to_rgb_real(img)
    return np.clip(np.floor(real + 0.5), 0, 255).astype(np.uint8)


def _pool_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Row-stochastic matrix mapping n_in samples to n_out 2x averages."""
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        j0, j1 = 2 * i, min(2 * i + 1, n_in - 1)
        if j0 == j1:
            m[i, j0] = 1.0
        else:
            m[i, j0] = m[i, j1] = 0.5
    return m


@lru_cache(maxsize=64)
def downsample_matrix(n_in: int) -> np.ndarray:
    return _pool_matrix((n_in + 1) // 2, n_in)


@lru_cache(maxsize=64)
def upsample_matrix(n_out: int) -> np.ndarray:
    """Bilinear interpolation matrix from ceil(n_out/2) chroma samples.

    Chroma sample i is centered at full-resolution coordinate 2i + 0.5
    (half-sample co-sited); edge positions clamp to the nearest sample.
    """
    n_in = (n_out + 1) // 2
    m = np.zeros((n_out, n_in))
    for j in range(n_out):
        c = (j - 0.5) / 2.0
        c = min(max(c, 0.0), n_in - 1.0)
        i0 = int(np.floor(c))
        i1 = min(i0 + 1, n_in - 1)
        w1 = c - i0
        m[j, i0] += 1.0 - w1
        m[j, i1] += w1
    return m


def downsample_420(img: YcbcrImage) -> YcbcrImage:
    """2x2 average pooling of the chroma planes (edges use available samples)."""
    if img.layout != "444":
        raise ValueError("downsample_420 expects layout 444")
    dr = downsample_matrix(img.height)
    dc = downsample_matrix(img.width)
    cb = dr @ img.cb @ dc.T
    cr = dr @ img.cr @ dc.T
    return YcbcrImage(img.y, cb, cr, "420", img.width, img.height)


def downsample_420_backward(grad_cb: np.ndarray, grad_cr: np.ndarray, height: int, width: int):
    """Adjoint of downsample_420 on the chroma planes."""
    dr = downsample_matrix(height)
    dc = downsample_matrix(width)
    return dr.T @ grad_cb @ dc, dr.T @ grad_cr @ dc


def upsample_420(img: YcbcrImage) -> YcbcrImage:
    """Bilinear chroma upsampling back to full resolution."""
    if img.layout != "420":
        raise ValueError("upsample_420 expects layout 420")
    ur = upsample_matrix(img.height)
    uc = upsample_matrix(img.width)
    cb = ur @ img.cb @ uc.T
    cr = ur @ img.cr @ uc.T
    return YcbcrImage(img.y, cb, cr, "444", img.width, img.height)


def upsample_420_backward(grad_cb: np.ndarray, grad_cr: np.ndarray, height: int, width: int):
    """Adjoint of upsample_420 on the chroma planes."""
    ur = upsample_matrix(height)
    uc = upsample_matrix(width)
    return ur.T @ grad_cb @ uc, ur.T @ grad_cr @ uc
