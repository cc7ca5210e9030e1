"""Rate-distortion / rate-accuracy sweeps and curve comparison.

All rate and distortion numbers on curves come from the real codec; the
differentiable estimate rides along as an extra column when an estimator
set is supplied, which is how the estimator-versus-actual correlation
check is produced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffproxy, entropy, taskloss
from .codec.measure import PSNR_CSV_CAP, encode_measure
from .codec.quantize import QuantTablePair


@dataclass
class RdPoint:
    q: int
    bpp_actual: float
    psnr: float
    bpp_estimated: float | None = None
    accuracy: float | None = None


@dataclass
class RdCurve:
    """One row per quality factor, averaged over an evaluation set."""

    points: list[RdPoint]

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.q)
        if any(p.bpp_actual <= 0 for p in self.points):
            raise ValueError("bpp_actual must be positive")

    def bpp(self) -> np.ndarray:
        return np.array([p.bpp_actual for p in self.points])

    def psnr(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def acc(self) -> np.ndarray:
        return np.array([p.accuracy for p in self.points], dtype=np.float64)


def _capped(v: float) -> float:
    return min(v, PSNR_CSV_CAP)


def sweep(tables: QuantTablePair, corpus, q_list, layout: str = "420",
          classifier: taskloss.ToyClassifierParams | None = None,
          eset: entropy.EntropyEstimatorSet | None = None) -> RdCurve:
    """Average actual bpp / PSNR (and optionally accuracy and estimated bpp)
    over a corpus for each quality factor.

    Every measurement runs through the reference codec; accuracy is scored
    on the hard-decoded 8-bit reconstruction. Per-image PSNR is capped at
    the CSV sentinel before averaging so lossless images stay finite.
    """
    q_list = sorted(set(int(q) for q in q_list))
    if not q_list:
        raise ValueError("q_list must be non-empty")
    records = []
    for rec in corpus:
        img, label = rec if isinstance(rec, tuple) else (rec, None)
        records.append((np.asarray(img), label))

    points = []
    for q in q_list:
        bpps, psnrs, accs, ests = [], [], [], []
        for img, label in records:
            r = encode_measure(img, tables, q, layout)
            bpps.append(r.bpp)
            psnrs.append(_capped(r.psnr))
            if classifier is not None and label is not None:
                accs.append(1.0 if taskloss.classify(classifier, r.reconstruction) == int(label) else 0.0)
            if eset is not None:
                _, soft, _ = diffproxy.forward(img, tables, q, layout, mode="hard")
                est = entropy.estimate_bits_image(soft, eset, want_coeff_grads=False,
                                                  want_param_grads=False)
                ests.append(est.bits / (img.shape[0] * img.shape[1]))
        points.append(RdPoint(
            q,
            float(np.mean(bpps)),
            float(np.mean(psnrs)),
            float(np.mean(ests)) if ests else None,
            float(np.mean(accs)) if accs else None,
        ))
    return RdCurve(points)


def estimate_vs_actual(tables: QuantTablePair, corpus, q_list, layout: str,
                       eset: entropy.EntropyEstimatorSet) -> list[tuple[int, float, float]]:
    """Per (image, q) scatter of (q, bpp_estimated, bpp_actual)."""
    rows = []
    for rec in corpus:
        img = rec[0] if isinstance(rec, tuple) else rec
        img = np.asarray(img)
        npix = img.shape[0] * img.shape[1]
        for q in q_list:
            r = encode_measure(img, tables, int(q), layout)
            _, soft, _ = diffproxy.forward(img, tables, int(q), layout, mode="hard")
            est = entropy.estimate_bits_image(soft, eset, want_coeff_grads=False,
                                              want_param_grads=False)
            rows.append((int(q), est.bits / npix, r.bpp))
    return rows


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; errors out on constant input."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("pearson needs two equal-length vectors of size >= 2")
    xd = xs - xs.mean()
    yd = ys - ys.mean()
    sx = float(np.sqrt(np.sum(xd * xd)))
    sy = float(np.sqrt(np.sum(yd * yd)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson undefined for constant input")
    return float(np.dot(xd, yd) / (sx * sy))


@dataclass
class CurveReport:
    """Matched-bpp and matched-PSNR comparison of two curves (b relative to a)."""

    bpp_grid: np.ndarray
    delta_psnr: np.ndarray  # psnr_b - psnr_a at matched bpp
    psnr_grid: np.ndarray
    delta_bpp_percent: np.ndarray  # 100 * (bpp_b - bpp_a) / bpp_a at matched PSNR
    max_delta_psnr: float
    max_bpp_saving_percent: float  # most negative delta_bpp, sign-flipped


def _interp(grid, xs, ys):
    order = np.argsort(xs)
    return np.interp(grid, xs[order], ys[order])


def compare_curves(a: RdCurve, b: RdCurve) -> CurveReport:
    """Piecewise-linear comparison on the union grid of the shared range."""
    lo = max(a.bpp().min(), b.bpp().min())
    hi = min(a.bpp().max(), b.bpp().max())
    if lo >= hi:
        raise ValueError("curves have disjoint bpp ranges")
    grid = np.unique(np.concatenate([a.bpp(), b.bpp()]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    delta_psnr = _interp(grid, b.bpp(), b.psnr()) - _interp(grid, a.bpp(), a.psnr())

    plo = max(a.psnr().min(), b.psnr().min())
    phi = min(a.psnr().max(), b.psnr().max())
    pgrid = np.unique(np.concatenate([a.psnr(), b.psnr()]))
    pgrid = pgrid[(pgrid >= plo) & (pgrid <= phi)]
    bpp_a = _interp(pgrid, a.psnr(), a.bpp())
    bpp_b = _interp(pgrid, b.psnr(), b.bpp())
    delta_bpp = 100.0 * (bpp_b - bpp_a) / bpp_a
    return CurveReport(
        grid, delta_psnr, pgrid, delta_bpp,
        float(delta_psnr.max()) if delta_psnr.size else math.nan,
        float(-delta_bpp.min()) if delta_bpp.size else math.nan,
    )


# -- CSV / JSON rendering ----------------------------------------------------

def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        v = PSNR_CSV_CAP
    return f"{v:.6g}"


def emit_csv(curve: RdCurve, destination) -> str:
    """Render a curve as CSV (fixed column order, 6 significant digits).

    `destination` is a path or a writable text stream; the text is also
    returned.
    """
    lines = ["q,bpp_actual,bpp_estimated,psnr,accuracy"]
    for p in curve.points:
        lines.append(",".join([
            str(p.q), _fmt(p.bpp_actual), _fmt(p.bpp_estimated),
            _fmt(min(p.psnr, PSNR_CSV_CAP)), _fmt(p.accuracy),
        ]))
    text = "\n".join(lines) + "\n"
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            Path(destination).write_text(text)
    return text


def read_curve_csv(source) -> RdCurve:
    """Parse a curve CSV produced by emit_csv (path, stream, or text)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        text = Path(s).read_text() if "\n" not in s else s
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header != ["q", "bpp_actual", "bpp_estimated", "psnr", "accuracy"]:
        raise ValueError(f"unexpected CSV header: {lines[0]!r}")
    points = []
    for ln in lines[1:]:
        q, bpp, est, ps, acc = ln.split(",")
        points.append(RdPoint(
            int(q), float(bpp), float(ps),
            float(est) if est else None,
            float(acc) if acc else None,
        ))
    return RdCurve(points)


def report_json(report: CurveReport, destination=None) -> str:
    """JSON mirror of a comparison report."""
    payload = {
        "bpp_grid": report.bpp_grid.tolist(),
        "delta_psnr": report.delta_psnr.tolist(),
        "psnr_grid": report.psnr_grid.tolist(),
        "delta_bpp_percent": report.delta_bpp_percent.tolist(),
        "max_delta_psnr": report.max_delta_psnr,
        "max_bpp_saving_percent": report.max_bpp_saving_percent,
    }
    text = json.dumps(payload, indent=2)
    if destination is not None:
        Path(destination).write_text(text)
    return text


def scatter_csv(rows: list[tuple[int, float, float]], destination=None) -> str:
    """CSV for estimator-versus-actual scatters: (q, bpp_estimated, bpp_actual)."""
    lines = ["q,bpp_estimated,bpp_actual"]
    for q, est, act in rows:
        lines.append(f"{q},{est:.6g},{act:.6g}")
    text = "\n".join(lines) + "\n"
    if destination is not None:
        Path(destination).write_text(text)
    return text
