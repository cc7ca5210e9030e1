"""Dataset ingestion: P6/P5 PPM files, labels, and bilinear resizing."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class PpmError(ValueError):
    """Unreadable or unsupported PPM file."""


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise PpmError("truncated header")
    return data[start:pos], pos


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM (P6) or PGM (P5) file as (H, W, 3) uint8.

    Grayscale inputs are replicated across the three channels. Only
    maxval 255 is accepted.
    """
    data = Path(path).read_bytes()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P6", b"P5"):
        raise PpmError(f"unsupported magic {magic!r} (want P6 or P5)")
    w_tok, pos = _read_token(data, pos)
    h_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    try:
        w, h, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except ValueError as e:
        raise PpmError(f"bad header field: {e}") from None
    if maxval != 255:
        raise PpmError(f"only maxval 255 is supported, got {maxval}")
    if w <= 0 or h <= 0:
        raise PpmError(f"bad dimensions {w}x{h}")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    need = w * h * channels
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise PpmError(f"truncated pixel data: want {need} bytes, have {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr.copy()


def write_ppm(path: str | Path, img: np.ndarray):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize to (out_h, out_w), rounded to uint8.

    Corner samples map exactly onto corner samples; an already-target-size
    image passes through byte-identical.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.astype(np.uint8, copy=True)

    def coords(n_in, n_out):
        if n_out == 1:
            return np.array([(n_in - 1) / 2.0])
        return np.arange(n_out) * (n_in - 1) / (n_out - 1)

    cy = coords(h, out_h)
    cx = coords(w, out_w)
    y0 = np.floor(cy).astype(int)
    x0 = np.floor(cx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (cy - y0)[:, None, None]
    wx = (cx - x0)[None, :, None]
    a = img[np.ix_(y0, x0)].astype(np.float64)
    b = img[np.ix_(y0, x1)].astype(np.float64)
    c = img[np.ix_(y1, x0)].astype(np.float64)
    d = img[np.ix_(y1, x1)].astype(np.float64)
    out = (a * (1 - wy) * (1 - wx) + b * (1 - wy) * wx
           + c * wy * (1 - wx) + d * wy * wx)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def read_labels(path: str | Path) -> dict[str, int]:
    """Label index: whitespace-separated `filename class` lines, '#' comments."""
    labels = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'filename class'")
        labels[parts[0]] = int(parts[1])
    return labels


@dataclass
class Corpus:
    """Ingested images at a common size, with optional labels."""

    records: list[tuple[np.ndarray, int | None]]
    names: list[str]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def images(self) -> list[np.ndarray]:
        return [img for img, _ in self.records]

    def labeled(self) -> bool:
        return all(label is not None for _, label in self.records)


def ingest(dataset_dir: str | Path, size: int = 299,
           labels_path: str | Path | None = None) -> Corpus:
    """Load every PPM/PGM under a directory, resized to size x size.

    Files sort lexicographically for determinism; unreadable files are
    skipped and reported in the result. An empty corpus is an error.
    """
    root = Path(dataset_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    labels = read_labels(labels_path) if labels_path else {}
    records, names, skipped = [], [], []
    files = sorted(p for p in root.iterdir()
                   if p.is_file() and p.suffix.lower() in (".ppm", ".pgm"))
    for f in files:
        try:
            img = bilinear_resize(read_ppm(f), size, size)
        except (PpmError, OSError) as e:
            skipped.append((f.name, str(e)))
            continue
        records.append((img, labels.get(f.name)))
        names.append(f.name)
    if not records:
        raise ValueError(f"no readable PPM images in {root}")
    return Corpus(records, names, skipped)


def normalize_corpus(corpus) -> list[tuple[np.ndarray, int | None]]:
    """Accept a Corpus, a list of images, or a list of (image, label) pairs."""
    if isinstance(corpus, Corpus):
        records = corpus.records
    else:
        records = [rec if isinstance(rec, tuple) else (rec, None) for rec in corpus]
        records = [(np.asarray(img), label) for img, label in records]
    if len(records) == 0:
        raise ValueError("corpus must be non-empty")
    shape = records[0][0].shape
    if any(img.shape != shape for img, _ in records):
        raise ValueError("all corpus images must share a common size")
    return records
