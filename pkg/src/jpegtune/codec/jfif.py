"""JFIF baseline file writer and parser (SOI/APP0/DQT/SOF0/DHT/SOS/EOI)."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dct import CoeffPlanes
from .huffman import (
    AC_CHROMA,
    AC_LUMA,
    DC_CHROMA,
    DC_LUMA,
    ZIGZAG,
    BitStats,
    HuffmanTable,
    entropy_decode,
    entropy_encode,
)
from .quantize import IntQuantTablePair

SOI = 0xD8
EOI = 0xD9
APP0 = 0xE0
DQT = 0xDB
SOF0 = 0xC0
DHT = 0xC4
SOS = 0xDA

_PROGRESSIVE_SOFS = {0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}


class JfifError(ValueError):
    """Malformed or unsupported JPEG stream."""


@dataclass
class JpegFile:
    """Everything recovered from (or fed to) a baseline JFIF byte stream."""

    width: int
    height: int
    layout: str
    tables: IntQuantTablePair
    qcoeffs: CoeffPlanes
    stats: BitStats | None = None


def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def _dqt_payload(tables: IntQuantTablePair) -> bytes:
    out = b""
    for table_id, table in ((0, tables.luma), (1, tables.chroma)):
        zz = table.reshape(64)[ZIGZAG].astype(np.uint8)
        out += struct.pack("B", table_id) + zz.tobytes()
    return out


def _dht_payload() -> bytes:
    out = b""
    for cls, table_id, table in (
        (0, 0, DC_LUMA),
        (1, 0, AC_LUMA),
        (0, 1, DC_CHROMA),
        (1, 1, AC_CHROMA),
    ):
        out += struct.pack("B", (cls << 4) | table_id)
        out += bytes(table.bits) + bytes(table.vals)
    return out


def write_jfif(tables: IntQuantTablePair, layout: str, qcoeffs: CoeffPlanes) -> tuple[bytes, BitStats]:
    """Serialize quantized coefficients into a standard baseline JFIF file."""
    if layout not in ("420", "444"):
        raise JfifError(f"unsupported layout {layout!r}")
    w, h = qcoeffs.width, qcoeffs.height
    segment, stats = entropy_encode(qcoeffs)

    out = bytearray()
    out += struct.pack(">BB", 0xFF, SOI)
    app0 = b"JFIF\x00" + struct.pack(">BBBHHBB", 1, 1, 0, 1, 1, 0, 0)
    out += _segment(APP0, app0)
    out += _segment(DQT, _dqt_payload(tables))
    y_sampling = 0x22 if layout == "420" else 0x11
    sof = struct.pack(">BHHB", 8, h, w, 3)
    sof += struct.pack("BBB", 1, y_sampling, 0)  # Y
    sof += struct.pack("BBB", 2, 0x11, 1)  # Cb
    sof += struct.pack("BBB", 3, 0x11, 1)  # Cr
    out += _segment(SOF0, sof)
    out += _segment(DHT, _dht_payload())
    sos = struct.pack("B", 3)
    sos += struct.pack("BB", 1, 0x00)  # Y: DC table 0, AC table 0
    sos += struct.pack("BB", 2, 0x11)  # Cb: DC table 1, AC table 1
    sos += struct.pack("BB", 3, 0x11)
    sos += struct.pack("BBB", 0, 63, 0)
    out += _segment(SOS, sos)
    out += segment
    out += struct.pack(">BB", 0xFF, EOI)
    return bytes(out), stats


def _read_u16(data: bytes, pos: int) -> int:
    if pos + 2 > len(data):
        raise JfifError("truncated stream")
    return struct.unpack_from(">H", data, pos)[0]


def _parse_dqt(payload: bytes, tables: dict[int, np.ndarray]):
    pos = 0
    while pos < len(payload):
        pq_tq = payload[pos]
        pq, tq = pq_tq >> 4, pq_tq & 0x0F
        pos += 1
        if pq != 0:
            raise JfifError("16-bit quantization tables are not supported")
        if pos + 64 > len(payload):
            raise JfifError("truncated DQT segment")
        zz = np.frombuffer(payload[pos : pos + 64], dtype=np.uint8).astype(np.int64)
        table = np.zeros(64, dtype=np.int64)
        table[ZIGZAG] = zz
        tables[tq] = table.reshape(8, 8)
        pos += 64


def _parse_dht(payload: bytes, tables: dict[tuple[int, int], HuffmanTable]):
    pos = 0
    while pos < len(payload):
        tc_th = payload[pos]
        tc, th = tc_th >> 4, tc_th & 0x0F
        pos += 1
        if pos + 16 > len(payload):
            raise JfifError("truncated DHT segment")
        bits = list(payload[pos : pos + 16])
        pos += 16
        n = sum(bits)
        if pos + n > len(payload):
            raise JfifError("truncated DHT segment")
        vals = list(payload[pos : pos + n])
        pos += n
        tables[(tc, th)] = HuffmanTable(bits, vals)


def read_jfif(data: bytes) -> JpegFile:
    """Parse a baseline JFIF stream produced by this codec (or compatible)."""
    if len(data) < 4 or data[0] != 0xFF or data[1] != SOI:
        raise JfifError("missing SOI marker")
    pos = 2
    qtables: dict[int, np.ndarray] = {}
    htables: dict[tuple[int, int], HuffmanTable] = {}
    sof = None
    sos = None
    while True:
        if pos + 2 > len(data):
            raise JfifError("truncated stream: no SOS found")
        if data[pos] != 0xFF:
            raise JfifError(f"expected marker at offset {pos}")
        marker = data[pos + 1]
        pos += 2
        if marker == EOI:
            raise JfifError("EOI before scan data")
        if marker in _PROGRESSIVE_SOFS:
            raise JfifError("only baseline sequential (SOF0) streams are supported")
        if marker in (SOI, 0x01) or 0xD0 <= marker <= 0xD7:
            continue  # parameterless markers
        length = _read_u16(data, pos)
        payload = data[pos + 2 : pos + length]
        if len(payload) != length - 2:
            raise JfifError("truncated segment payload")
        pos += length
        if marker == DQT:
            _parse_dqt(payload, qtables)
        elif marker == DHT:
            _parse_dht(payload, htables)
        elif marker == SOF0:
            sof = payload
        elif marker == SOS:
            sos = payload
            break
        # APP0/COM and other tolerated segments are skipped

    if sof is None:
        raise JfifError("missing SOF0 before SOS")
    precision, h, w, ncomp = struct.unpack_from(">BHHB", sof, 0)
    if precision != 8 or ncomp != 3:
        raise JfifError("only 8-bit, 3-component images are supported")
    samplings = {}
    for i in range(ncomp):
        cid, hv, tq = struct.unpack_from("BBB", sof, 6 + 3 * i)
        samplings[cid] = (hv, tq)
    if samplings.get(2, (0, 0))[0] != 0x11 or samplings.get(3, (0, 0))[0] != 0x11:
        raise JfifError("unsupported chroma sampling factors")
    y_sampling = samplings.get(1, (0, 0))[0]
    if y_sampling == 0x22:
        layout = "420"
    elif y_sampling == 0x11:
        layout = "444"
    else:
        raise JfifError(f"unsupported luma sampling factor {y_sampling:#x}")
    if 0 not in qtables or 1 not in qtables:
        raise JfifError("missing quantization tables")
    tables = IntQuantTablePair(qtables[0], qtables[1])

    ns = sos[0]
    if ns != 3 or len(sos) < 1 + 2 * ns + 3:
        raise JfifError("unsupported scan header")
    channel_names = {1: "y", 2: "cb", 3: "cr"}
    scan_tables: dict[str, tuple[HuffmanTable, HuffmanTable]] = {}
    for i in range(ns):
        cid, td_ta = sos[1 + 2 * i], sos[2 + 2 * i]
        td, ta = td_ta >> 4, td_ta & 0x0F
        if cid not in channel_names:
            raise JfifError(f"unexpected scan component id {cid}")
        try:
            scan_tables[channel_names[cid]] = (htables[(0, td)], htables[(1, ta)])
        except KeyError:
            raise JfifError("scan references an undefined Huffman table") from None

    # The scan runs until the EOI marker (no restart markers are emitted).
    end = data.rfind(bytes([0xFF, EOI]))
    if end < 0:
        raise JfifError("missing EOI marker")
    segment = data[pos:end]
    qcoeffs = entropy_decode(segment, layout, w, h, scan_tables)
    return JpegFile(w, h, layout, tables, qcoeffs)
