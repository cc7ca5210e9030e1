"""Differentiable JPEG compression-decompression with table gradients.

The forward pass mirrors the reference codec step for step but stays in
real arithmetic: the only non-linearity is the cubic soft-rounding stand-in
for integer quantization. A tape caches every intermediate needed to run
exact reverse-mode differentiation of any downstream scalar with respect
to the two quantization tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec.color import (
    RGB_TO_YCBCR,
    YCBCR_TO_RGB,
    YcbcrImage,
    downsample_420,
    rgb_to_ycbcr,
    upsample_420,
    upsample_420_backward,
    validate_rgb,
)
from .codec.dct import (
    blockify,
    fdct_blocks,
    fdct_plane,
    idct_blocks,
    plane_pad_multiple,
    unblockify,
)
from .codec.quantize import QuantTablePair, quality_scale, round_half_away, scale_table

CHANNELS = ("y", "cb", "cr")


def soft_round(x):
    """Differentiable rounding: round(x) + (x - round(x))^3.

    Returns (value, derivative); the derivative of the piecewise-constant
    round term is zero, so d/dx = 3 (x - round(x))^2.
    """
    x = np.asarray(x, dtype=np.float64)
    n = round_half_away(x)
    r = x - n
    return n + r**3, 3.0 * r**2


def effective_table(p: QuantTablePair, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Quality-scaled real tables, floored at 1.0 but never rounded.

    Scaling is a constant positive multiplier, so gradients reach the raw
    table entries undisturbed wherever the floor is inactive.
    """
    s = quality_scale(q) / 100.0
    return np.maximum(p.luma * s, 1.0), np.maximum(p.chroma * s, 1.0)


@dataclass
class ForwardTape:
    """Cached intermediates of one proxy forward pass."""

    mode: str
    layout: str
    q: int
    width: int
    height: int
    scale: float  # s(q)/100
    tables: dict[str, np.ndarray]  # effective real tables per channel
    active: dict[str, np.ndarray]  # where the 1.0 floor is inactive (grad flows)
    coeffs: dict[str, np.ndarray]  # pre-quantization DCT coefficients d
    normalized: dict[str, np.ndarray]  # z = d / t
    soft_deriv: dict[str, np.ndarray]  # d zhat / d z = 3 r^2
    soft_values: dict[str, np.ndarray]  # zhat
    clamp_mask: np.ndarray | None = None
    consumed: bool = field(default=False, compare=False)

    def normalized_planes(self) -> "SoftQuantizedCoeffs":
        """Un-rounded table-normalized coefficients (for noise relaxation)."""
        return SoftQuantizedCoeffs(
            self.normalized["y"], self.normalized["cb"], self.normalized["cr"],
            self.layout, self.width, self.height,
        )


@dataclass
class SoftQuantizedCoeffs:
    """Per-channel table-normalized coefficient blocks (unit bin width)."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    layout: str
    width: int
    height: int

    def channels(self):
        return (("y", self.y), ("cb", self.cb), ("cr", self.cr))


@dataclass
class TableGradients:
    """Gradient of a scalar with respect to the two tables (any sign)."""

    luma: np.ndarray
    chroma: np.ndarray

    def __add__(self, other: "TableGradients") -> "TableGradients":
        return TableGradients(self.luma + other.luma, self.chroma + other.chroma)

    def scaled(self, c: float) -> "TableGradients":
        return TableGradients(self.luma * c, self.chroma * c)

    @staticmethod
    def zeros() -> "TableGradients":
        return TableGradients(np.zeros((8, 8)), np.zeros((8, 8)))


def forward(x: np.ndarray, p: QuantTablePair, q: int, layout: str = "420",
            mode: str = "soft") -> tuple[np.ndarray, SoftQuantizedCoeffs, ForwardTape]:
    """Run the differentiable compression-decompression pipeline.

    Returns the real-valued reconstruction (clamped to [0, 255], no 8-bit
    rounding), the (soft-)quantized normalized coefficients, and the tape.
    In "hard" mode quantization uses the rounded/clipped integer tables so
    the output matches the reference codec exactly; hard tapes cannot be
    differentiated through.
    """
    if mode not in ("soft", "hard"):
        raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")
    x = validate_rgb(x)
    h, w = x.shape[:2]
    ycc = rgb_to_ycbcr(x)
    if layout == "420":
        ycc = downsample_420(ycc)
    elif layout != "444":
        raise ValueError(f"unsupported layout {layout!r}")

    scale = quality_scale(q) / 100.0
    if mode == "soft":
        t_luma, t_chroma = effective_table(p, q)
        active_luma = (p.luma * scale) > 1.0
        active_chroma = (p.chroma * scale) > 1.0
    else:
        ints = scale_table(p, q)
        t_luma = ints.luma.astype(np.float64)
        t_chroma = ints.chroma.astype(np.float64)
        active_luma = np.zeros((8, 8), dtype=bool)
        active_chroma = np.zeros((8, 8), dtype=bool)

    tables = {"y": t_luma, "cb": t_chroma, "cr": t_chroma}
    active = {"y": active_luma, "cb": active_chroma, "cr": active_chroma}
    planes = {"y": ycc.y, "cb": ycc.cb, "cr": ycc.cr}

    coeffs, normalized, soft_vals, soft_der, dequant = {}, {}, {}, {}, {}
    for ch in CHANNELS:
        d = fdct_plane(planes[ch], plane_pad_multiple(ch, layout))
        z = d / tables[ch]
        if mode == "soft":
            zhat, der = soft_round(z)
        else:
            zhat = round_half_away(z)
            der = np.zeros_like(z)
        coeffs[ch], normalized[ch] = d, z
        soft_vals[ch], soft_der[ch] = zhat, der
        dequant[ch] = zhat * tables[ch]

    if layout == "420":
        ch_h, ch_w = (h + 1) // 2, (w + 1) // 2
    else:
        ch_h, ch_w = h, w
    rec_y = unblockify(idct_blocks(dequant["y"]))[:h, :w] + 128.0
    rec_cb = unblockify(idct_blocks(dequant["cb"]))[:ch_h, :ch_w] + 128.0
    rec_cr = unblockify(idct_blocks(dequant["cr"]))[:ch_h, :ch_w] + 128.0
    rec = YcbcrImage(rec_y, rec_cb, rec_cr, layout, w, h)
    if layout == "420":
        rec = upsample_420(rec)
    ycc_stack = np.stack([rec.y, rec.cb, rec.cr], axis=-1)
    rgb_real = (ycc_stack - np.array([0.0, 128.0, 128.0])) @ YCBCR_TO_RGB.T
    mask = (rgb_real >= 0.0) & (rgb_real <= 255.0)
    reconstruction = np.clip(rgb_real, 0.0, 255.0)

    tape = ForwardTape(mode, layout, q, w, h, scale, tables, active, coeffs,
                       normalized, soft_der, soft_vals, clamp_mask=mask)
    soft_coeffs = SoftQuantizedCoeffs(soft_vals["y"], soft_vals["cb"], soft_vals["cr"],
                                      layout, w, h)
    return reconstruction, soft_coeffs, tape


def backward(tape: ForwardTape, grad_reconstruction: np.ndarray | None = None,
             grad_softcoeffs: SoftQuantizedCoeffs | dict | None = None) -> TableGradients:
    """Exact reverse-mode gradient of a downstream scalar w.r.t. the tables.

    `grad_reconstruction` is the upstream gradient on the clamped real
    reconstruction; `grad_softcoeffs` the upstream gradient on the
    (normalized) soft-quantized coefficients. Either may be omitted.
    Accounts for both table paths: the division before rounding and the
    multiplication after it.
    """
    if tape.mode != "soft":
        raise ValueError("backward requires a tape from a soft-mode forward")
    if tape.consumed:
        raise ValueError("tape already consumed by a previous backward call")
    tape.consumed = True

    h, w = tape.height, tape.width
    grad_dhat = {}
    if grad_reconstruction is not None:
        g = np.asarray(grad_reconstruction, dtype=np.float64) * tape.clamp_mask
        g_ycc = g @ YCBCR_TO_RGB  # adjoint of the affine color inverse
        gy, gcb, gcr = g_ycc[:, :, 0], g_ycc[:, :, 1], g_ycc[:, :, 2]
        if tape.layout == "420":
            gcb, gcr = upsample_420_backward(gcb, gcr, h, w)
        grads_plane = {"y": gy, "cb": gcb, "cr": gcr}
        for ch in CHANNELS:
            gp = grads_plane[ch]
            nby, nbx = tape.coeffs[ch].shape[:2]
            padded = np.zeros((nby * 8, nbx * 8))
            padded[: gp.shape[0], : gp.shape[1]] = gp  # crop adjoint: zero-fill
            grad_dhat[ch] = fdct_blocks(blockify(padded))  # adjoint of orthonormal IDCT
    else:
        grad_dhat = {ch: np.zeros_like(tape.coeffs[ch]) for ch in CHANNELS}

    if grad_softcoeffs is None:
        grad_zhat_up = {ch: None for ch in CHANNELS}
    elif isinstance(grad_softcoeffs, dict):
        grad_zhat_up = {ch: grad_softcoeffs.get(ch) for ch in CHANNELS}
    else:
        grad_zhat_up = {"y": grad_softcoeffs.y, "cb": grad_softcoeffs.cb,
                        "cr": grad_softcoeffs.cr}

    table_grads = {"y": np.zeros((8, 8)), "cb": np.zeros((8, 8)), "cr": np.zeros((8, 8))}
    for ch in CHANNELS:
        t = tape.tables[ch]
        g_zhat = grad_dhat[ch] * t
        if grad_zhat_up[ch] is not None:
            g_zhat = g_zhat + grad_zhat_up[ch]
        g_z = g_zhat * tape.soft_deriv[ch]
        # d zhat*t / dt = zhat (product rule) plus the chain through z = d/t
        g_t = grad_dhat[ch] * tape.soft_values[ch] + g_z * (-tape.normalized[ch] / t)
        table_grads[ch] = g_t.sum(axis=(0, 1)) * tape.active[ch] * tape.scale

    return TableGradients(table_grads["y"], table_grads["cb"] + table_grads["cr"])


def distortion_loss(x: np.ndarray, reconstruction: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared RGB differences and its gradient w.r.t. the reconstruction."""
    diff = reconstruction - np.asarray(x, dtype=np.float64)
    return float(np.sum(diff * diff)), 2.0 * diff
