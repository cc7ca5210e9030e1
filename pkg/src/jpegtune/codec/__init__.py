"""Bit-accurate baseline JPEG codec: the ground truth for rate and distortion."""

from .color import (
    YcbcrImage,
    downsample_420,
    rgb_to_ycbcr,
    upsample_420,
    validate_rgb,
    ycbcr_to_rgb,
    ycbcr_to_rgb_real,
)
from .dct import CoeffPlanes, fdct_image, idct_image
from .huffman import BitStats, CoefficientRangeError, entropy_decode, entropy_encode
from .jfif import JfifError, JpegFile, read_jfif, write_jfif
from .measure import (
    MeasureResult,
    decode_jpeg,
    encode_jpeg,
    encode_measure,
    forward_to_quantized,
    psnr,
    reconstruct,
    reconstruct_real,
)
from .quantize import (
    DEFAULT_CHROMA,
    DEFAULT_LUMA,
    IntQuantTablePair,
    QuantTablePair,
    default_tables,
    dequantize,
    quality_scale,
    quantize_hard,
    round_half_away,
    scale_table,
)

__all__ = [
    "BitStats",
    "CoeffPlanes",
    "CoefficientRangeError",
    "DEFAULT_CHROMA",
    "DEFAULT_LUMA",
    "IntQuantTablePair",
    "JfifError",
    "JpegFile",
    "MeasureResult",
    "QuantTablePair",
    "YcbcrImage",
    "decode_jpeg",
    "default_tables",
    "dequantize",
    "downsample_420",
    "encode_jpeg",
    "encode_measure",
    "entropy_decode",
    "entropy_encode",
    "fdct_image",
    "forward_to_quantized",
    "idct_image",
    "psnr",
    "quality_scale",
    "quantize_hard",
    "read_jfif",
    "reconstruct",
    "reconstruct_real",
    "rgb_to_ycbcr",
    "round_half_away",
    "scale_table",
    "upsample_420",
    "validate_rgb",
    "write_jfif",
    "ycbcr_to_rgb",
    "ycbcr_to_rgb_real",
]
