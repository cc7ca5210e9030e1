"""Baseline sequential Huffman entropy coding with the standard tables.

Implements zigzag scanning, DC DPCM category coding, AC run/size coding
with ZRL and EOB, byte stuffing, and the exact per-channel bit accounting
needed for rate measurement. Only the four standard (ITU-T T.81 Annex K)
code tables are supported; table optimization is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dct import CoeffPlanes


def _zigzag_order() -> np.ndarray:
    """Flat indices of the 8x8 zigzag scan, by walking the anti-diagonals."""
    order = []
    for s in range(15):
        cells = [(i, s - i) for i in range(max(0, s - 7), min(s, 7) + 1)]
        if s % 2 == 0:
            cells.reverse()  # even diagonals run bottom-left to top-right
        order.extend(r * 8 + c for r, c in cells)
    return np.array(order, dtype=np.int64)


ZIGZAG = _zigzag_order()
UNZIGZAG = np.argsort(ZIGZAG)

# Standard Huffman table definitions: (counts of codes per length 1..16, symbols).
STD_DC_LUMA_BITS = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
STD_DC_LUMA_VALS = list(range(12))

STD_DC_CHROMA_BITS = [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0]
STD_DC_CHROMA_VALS = list(range(12))

STD_AC_LUMA_BITS = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D]
# fmt: off
STD_AC_LUMA_VALS = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
    0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
    0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
]

STD_AC_CHROMA_BITS = [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77]
STD_AC_CHROMA_VALS = [
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21,
    0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0,
    0x15, 0x62, 0x72, 0xD1, 0x0A, 0x16, 0x24, 0x34,
    0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
    0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38,
    0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78,
    0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96,
    0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5,
    0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
    0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
    0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2,
    0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
    0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9,
    0xEA, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
]
# fmt: on


class HuffmanTable:
    """Canonical Huffman code table built from (counts-per-length, symbols)."""

    def __init__(self, bits: list[int], vals: list[int]):
        if len(bits) != 16 or sum(bits) != len(vals):
            raise ValueError("inconsistent Huffman table definition")
        self.bits = list(bits)
        self.vals = list(vals)
        self.encode_map: dict[int, tuple[int, int]] = {}  # symbol -> (code, length)
        self.decode_map: dict[tuple[int, int], int] = {}  # (length, code) -> symbol
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(bits[length - 1]):
                sym = vals[k]
                self.encode_map[sym] = (code, length)
                self.decode_map[(length, code)] = sym
                code += 1
                k += 1
            code <<= 1


DC_LUMA = HuffmanTable(STD_DC_LUMA_BITS, STD_DC_LUMA_VALS)
DC_CHROMA = HuffmanTable(STD_DC_CHROMA_BITS, STD_DC_CHROMA_VALS)
AC_LUMA = HuffmanTable(STD_AC_LUMA_BITS, STD_AC_LUMA_VALS)
AC_CHROMA = HuffmanTable(STD_AC_CHROMA_BITS, STD_AC_CHROMA_VALS)


class CoefficientRangeError(ValueError):
    """A coefficient falls outside the baseline category range."""


class BitWriter:
    """MSB-first bit accumulator with JPEG byte stuffing (0xFF -> 0xFF 0x00)."""

    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, code: int, length: int):
        if length == 0:
            return
        self._acc = (self._acc << length) | (code & ((1 << length) - 1))
        self._nbits += length
        while self._nbits >= 8:
            self._nbits -= 8
            byte = (self._acc >> self._nbits) & 0xFF
            self._bytes.append(byte)
            if byte == 0xFF:
                self._bytes.append(0x00)
        self._acc &= (1 << self._nbits) - 1

    def flush(self) -> bytes:
        """Pad the final partial byte with 1-bits and return the segment."""
        if self._nbits:
            pad = 8 - self._nbits
            self.write((1 << pad) - 1, pad)
        return bytes(self._bytes)


class BitReader:
    """Reads an entropy-coded segment, un-stuffing 0xFF 0x00 pairs."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._acc = 0
        self._nbits = 0

    def read_bit(self) -> int:
        if self._nbits == 0:
            if self._pos >= len(self._data):
                raise ValueError("entropy segment exhausted")
            byte = self._data[self._pos]
            self._pos += 1
            if byte == 0xFF:
                if self._pos >= len(self._data) or self._data[self._pos] != 0x00:
                    raise ValueError("unexpected marker inside entropy segment")
                self._pos += 1
            self._acc = byte
            self._nbits = 8
        self._nbits -= 1
        return (self._acc >> self._nbits) & 1

    def read_bits(self, n: int) -> int:
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v

    def read_symbol(self, table: HuffmanTable) -> int:
        code = 0
        for length in range(1, 17):
            code = (code << 1) | self.read_bit()
            sym = table.decode_map.get((length, code))
            if sym is not None:
                return sym
        raise ValueError("invalid Huffman code in entropy segment")


@dataclass
class BitStats:
    """Exact entropy-coded bit counts, split by component and DC/AC."""

    dc_bits: dict[str, int] = field(default_factory=lambda: {"y": 0, "cb": 0, "cr": 0})
    ac_bits: dict[str, int] = field(default_factory=lambda: {"y": 0, "cb": 0, "cr": 0})

    @property
    def total_bits(self) -> int:
        return sum(self.dc_bits.values()) + sum(self.ac_bits.values())


def _magnitude_size(v: int) -> int:
    return int(abs(v)).bit_length()


def _amplitude_bits(v: int, size: int) -> int:
    # Positive values code as-is; negative values code as (v - 1) in size low bits.
    return v if v >= 0 else (v - 1) & ((1 << size) - 1)


def _extend(bits: int, size: int) -> int:
    if size == 0:
        return 0
    if bits < (1 << (size - 1)):
        return bits - (1 << size) + 1
    return bits


def encode_block(zz: np.ndarray, prev_dc: int, dc_table: HuffmanTable,
                 ac_table: HuffmanTable, writer: BitWriter) -> tuple[int, int, int]:
    """Encode one zigzag-ordered block; returns (dc_bits, ac_bits, new_prev_dc)."""
    dc = int(zz[0])
    diff = dc - prev_dc
    size = _magnitude_size(diff)
    if size > 11:
        raise CoefficientRangeError(f"DC difference {diff} exceeds baseline range")
    code, length = dc_table.encode_map[size]
    writer.write(code, length)
    writer.write(_amplitude_bits(diff, size), size)
    dc_bits = length + size

    ac_bits = 0
    nz = np.nonzero(zz[1:])[0]
    run_start = 1
    for idx in nz:
        k = int(idx) + 1
        run = k - run_start
        while run > 15:
            code, length = ac_table.encode_map[0xF0]  # ZRL: sixteen zeros
            writer.write(code, length)
            ac_bits += length
            run -= 16
        v = int(zz[k])
        size = _magnitude_size(v)
        if size > 10:
            raise CoefficientRangeError(f"AC coefficient {v} exceeds baseline range")
        code, length = ac_table.encode_map[(run << 4) | size]
        writer.write(code, length)
        writer.write(_amplitude_bits(v, size), size)
        ac_bits += length + size
        run_start = k + 1
    if run_start <= 63:
        code, length = ac_table.encode_map[0x00]  # EOB
        writer.write(code, length)
        ac_bits += length
    return dc_bits, ac_bits, dc


def decode_block(reader: BitReader, prev_dc: int, dc_table: HuffmanTable,
                 ac_table: HuffmanTable) -> tuple[np.ndarray, int]:
    """Decode one block into zigzag order; returns (zz, new_prev_dc)."""
    zz = np.zeros(64, dtype=np.int64)
    size = reader.read_symbol(dc_table)
    diff = _extend(reader.read_bits(size), size)
    dc = prev_dc + diff
    zz[0] = dc
    k = 1
    while k <= 63:
        sym = reader.read_symbol(ac_table)
        if sym == 0x00:
            break
        run, size = sym >> 4, sym & 0x0F
        if size == 0:
            if run != 15:
                raise ValueError(f"invalid AC symbol {sym:#x}")
            k += 16
            continue
        k += run
        if k > 63:
            raise ValueError("AC run overflows block")
        zz[k] = _extend(reader.read_bits(size), size)
        k += 1
    return zz, dc


def mcu_block_order(qcoeffs: CoeffPlanes):
    """Yield (channel, by, bx) in interleaved MCU order.

    4:2:0 MCUs carry four luma blocks (2x2, row-major) then one Cb and one
    Cr block; 4:4:4 MCUs carry one block of each component.
    """
    if qcoeffs.layout == "420":
        mcus_y, mcus_x = qcoeffs.cb.shape[:2]
        for my in range(mcus_y):
            for mx in range(mcus_x):
                for dy in range(2):
                    for dx in range(2):
                        yield "y", 2 * my + dy, 2 * mx + dx
                yield "cb", my, mx
                yield "cr", my, mx
    else:
        nby, nbx = qcoeffs.y.shape[:2]
        for by in range(nby):
            for bx in range(nbx):
                yield "y", by, bx
                yield "cb", by, bx
                yield "cr", by, bx


def _tables_for(channel: str) -> tuple[HuffmanTable, HuffmanTable]:
    return (DC_LUMA, AC_LUMA) if channel == "y" else (DC_CHROMA, AC_CHROMA)


def entropy_encode(qcoeffs: CoeffPlanes) -> tuple[bytes, BitStats]:
    """Huffman-code quantized coefficients into an entropy segment."""
    planes = {"y": qcoeffs.y, "cb": qcoeffs.cb, "cr": qcoeffs.cr}
    zz_planes = {
        name: arr.reshape(arr.shape[0], arr.shape[1], 64)[:, :, ZIGZAG]
        for name, arr in planes.items()
    }
    writer = BitWriter()
    stats = BitStats()
    prev_dc = {"y": 0, "cb": 0, "cr": 0}
    for channel, by, bx in mcu_block_order(qcoeffs):
        dc_table, ac_table = _tables_for(channel)
        dc_bits, ac_bits, prev_dc[channel] = encode_block(
            zz_planes[channel][by, bx], prev_dc[channel], dc_table, ac_table, writer
        )
        stats.dc_bits[channel] += dc_bits
        stats.ac_bits[channel] += ac_bits
    return writer.flush(), stats


def entropy_decode(data: bytes, layout: str, width: int, height: int,
                   tables: dict[str, tuple[HuffmanTable, HuffmanTable]] | None = None) -> CoeffPlanes:
    """Decode an entropy segment back into quantized coefficient planes.

    `tables` maps channel -> (dc_table, ac_table); defaults to the standard
    Annex-K tables this codec writes.
    """
    from .dct import padded_size, plane_pad_multiple

    shapes = {}
    for channel in ("y", "cb", "cr"):
        if channel == "y":
            h, w = height, width
        elif layout == "420":
            h, w = (height + 1) // 2, (width + 1) // 2
        else:
            h, w = height, width
        m = plane_pad_multiple(channel, layout)
        shapes[channel] = (padded_size(h, m) // 8, padded_size(w, m) // 8)
    planes = {ch: np.zeros((*shapes[ch], 8, 8), dtype=np.int64) for ch in shapes}
    skeleton = CoeffPlanes(planes["y"], planes["cb"], planes["cr"], layout, width, height)

    reader = BitReader(data)
    prev_dc = {"y": 0, "cb": 0, "cr": 0}
    for channel, by, bx in mcu_block_order(skeleton):
        dc_table, ac_table = tables[channel] if tables else _tables_for(channel)
        zz, prev_dc[channel] = decode_block(reader, prev_dc[channel], dc_table, ac_table)
        planes[channel][by, bx] = zz[UNZIGZAG].reshape(8, 8)
    return skeleton
