"""8x8 block DCT with JPEG normalization, plus block padding helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import YcbcrImage


def dct_matrix() -> np.ndarray:
    """Orthonormal type-II DCT basis: A @ s @ A.T gives S(u,v) = 1/4 C(u)C(v) sum(...)."""
    u = np.arange(8).reshape(8, 1)
    x = np.arange(8).reshape(1, 8)
    a = 0.5 * np.cos((2 * x + 1) * u * np.pi / 16)
    a[0, :] *= 1.0 / np.sqrt(2.0)
    return a


DCT_A = dct_matrix()


@dataclass
class CoeffPlanes:
    """Per-channel DCT coefficients stored as (rows, cols, 8, 8) block grids.

    Block index (by, bx) scans the padded plane in raster order; coefficient
    (u, v) uses natural row/column frequency order (zigzag happens only at
    the bitstream boundary). `width`/`height` are the original luma
    dimensions, used to crop padding on inversion.
    """

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    layout: str
    width: int
    height: int

    def channels(self):
        return (("y", self.y), ("cb", self.cb), ("cr", self.cr))

    def block_counts(self) -> dict[str, int]:
        return {name: arr.shape[0] * arr.shape[1] for name, arr in self.channels()}


def padded_size(n: int, multiple: int) -> int:
    return ((n + multiple - 1) // multiple) * multiple


def plane_pad_multiple(channel: str, layout: str) -> int:
    # 4:2:0 pads luma to whole MCUs (16 px) so the 2x2 block interleave is exact.
    return 16 if (layout == "420" and channel == "y") else 8


def pad_plane(plane: np.ndarray, multiple: int) -> np.ndarray:
    """Pad bottom/right by edge replication to a multiple of `multiple`."""
    h, w = plane.shape
    ph, pw = padded_size(h, multiple), padded_size(w, multiple)
    if (ph, pw) == (h, w):
        return plane
    return np.pad(plane, ((0, ph - h), (0, pw - w)), mode="edge")


def pad_plane_backward(grad: np.ndarray, h: int, w: int) -> np.ndarray:
    """Adjoint of pad_plane: fold replicated-edge gradients back."""
    g = grad.copy()
    if g.shape[0] > h:
        g[h - 1, :] += g[h:, :].sum(axis=0)
        g = g[:h, :]
    if g.shape[1] > w:
        g[:, w - 1] += g[:, w:].sum(axis=1)
        g = g[:, :w]
    return g


def blockify(plane: np.ndarray) -> np.ndarray:
    """(H, W) -> (H/8, W/8, 8, 8); dimensions must be multiples of 8."""
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def unblockify(blocks: np.ndarray) -> np.ndarray:
    nby, nbx = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(nby * 8, nbx * 8)


def fdct_blocks(blocks: np.ndarray) -> np.ndarray:
    return DCT_A @ blocks @ DCT_A.T


def idct_blocks(coeffs: np.ndarray) -> np.ndarray:
    return DCT_A.T @ coeffs @ DCT_A


def fdct_plane(plane: np.ndarray, multiple: int) -> np.ndarray:
    """Level shift by -128, pad by replication, and transform into blocks."""
    return fdct_blocks(blockify(pad_plane(plane - 128.0, multiple)))


def idct_plane(coeffs: np.ndarray, h: int, w: int) -> np.ndarray:
    """Inverse transform, crop padding, and undo the level shift."""
    return unblockify(idct_blocks(coeffs))[:h, :w] + 128.0


def fdct_image(img: YcbcrImage) -> CoeffPlanes:
    y = fdct_plane(img.y, plane_pad_multiple("y", img.layout))
    cb = fdct_plane(img.cb, plane_pad_multiple("cb", img.layout))
    cr = fdct_plane(img.cr, plane_pad_multiple("cr", img.layout))
    return CoeffPlanes(y, cb, cr, img.layout, img.width, img.height)


def idct_image(coeffs: CoeffPlanes) -> YcbcrImage:
    h, w = coeffs.height, coeffs.width
    if coeffs.layout == "420":
        ch, cw = (h + 1) // 2, (w + 1) // 2
    else:
        ch, cw = h, w
    y = idct_plane(coeffs.y, h, w)
    cb = idct_plane(coeffs.cb, ch, cw)
    cr = idct_plane(coeffs.cr, ch, cw)
    return YcbcrImage(y, cb, cr, coeffs.layout, w, h)
