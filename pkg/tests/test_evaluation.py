"""Sweeps, Pearson correlation, curve comparison, CSV round trips."""

import io
import math

import numpy as np
import pytest

from jpegtune import evaluation, taskloss
from jpegtune.codec import default_tables, encode_measure
from jpegtune.evaluation import RdCurve, RdPoint
from tests.conftest import natural_corpus


def test_pearson_known_values():
    xs = np.arange(10.0)
    assert abs(evaluation.pearson(xs, 2 * xs + 3) - 1.0) < 1e-12
    assert abs(evaluation.pearson(xs, -xs) + 1.0) < 1e-12
    # hand/brute-force covariance: cov=1/3, var_x=var_y=2/3 -> r=0.5
    assert abs(evaluation.pearson([1, 2, 3], [1, 3, 2]) - 0.5) < 1e-12


def test_pearson_rejects_bad_input():
    with pytest.raises(ValueError):
        evaluation.pearson([1.0], [2.0])
    with pytest.raises(ValueError):
        evaluation.pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        evaluation.pearson([1.0, 2.0], [5.0, 5.0])


def test_sweep_constant_image_caps_psnr():
    corpus = [np.full((16, 16, 3), 128, dtype=np.uint8)]
    curve = evaluation.sweep(default_tables(), corpus, [10, 50, 90])
    for p in curve.points:
        assert p.psnr == 99.0  # lossless under any table, capped sentinel


def test_single_point_sweep_equals_encode_measure():
    img = natural_corpus(seed=4, n=1, size=32)[0]
    curve = evaluation.sweep(default_tables(), [img], [50])
    r = encode_measure(img, default_tables(), 50, "420")
    assert curve.points[0].bpp_actual == r.bpp
    assert curve.points[0].psnr == min(r.psnr, 99.0)
    assert curve.points[0].bpp_estimated is None
    assert curve.points[0].accuracy is None


def test_sweep_is_deterministic_and_bpp_increases_with_q():
    corpus = natural_corpus(seed=5, n=6, size=48)
    c1 = evaluation.sweep(default_tables(), corpus, [10, 30, 50, 70, 90])
    c2 = evaluation.sweep(default_tables(), corpus, [10, 30, 50, 70, 90])
    assert [p.bpp_actual for p in c1.points] == [p.bpp_actual for p in c2.points]
    bpp = c1.bpp()
    assert np.all(np.diff(bpp) > 0)


def test_sweep_accuracy_column():
    corpus = taskloss.make_texture_corpus(24, size=32, seed=6)
    clf = taskloss.train_toy_classifier(corpus, seed=0)
    curve = evaluation.sweep(default_tables(), corpus, [5, 90], classifier=clf)
    acc = {p.q: p.accuracy for p in curve.points}
    assert acc[90] > acc[5]  # heavy compression destroys the class pattern


def _line_curve(qs, bpps, psnrs):
    return RdCurve([RdPoint(q, b, p) for q, b, p in zip(qs, bpps, psnrs)])


def test_compare_identical_curves_is_zero():
    a = _line_curve([10, 50, 90], [1.0, 2.0, 3.0], [30.0, 35.0, 40.0])
    rep = evaluation.compare_curves(a, a)
    assert np.allclose(rep.delta_psnr, 0.0)
    assert np.allclose(rep.delta_bpp_percent, 0.0)


def test_compare_uniform_shift():
    a = _line_curve([10, 50, 90], [1.0, 2.0, 3.0], [30.0, 35.0, 40.0])
    b = _line_curve([10, 50, 90], [1.0, 2.0, 3.0], [31.0, 36.0, 41.0])
    rep = evaluation.compare_curves(a, b)
    assert np.allclose(rep.delta_psnr, 1.0)
    assert abs(rep.max_delta_psnr - 1.0) < 1e-12


def test_compare_closed_form_crossover():
    # a: psnr = 30 + 2 bpp; b: psnr = 28 + 3 bpp on bpp in [1, 4]
    bpp = np.array([1.0, 2.0, 3.0, 4.0])
    a = _line_curve([10, 40, 70, 90], bpp, 30 + 2 * bpp)
    b = _line_curve([10, 40, 70, 90], bpp, 28 + 3 * bpp)
    rep = evaluation.compare_curves(a, b)
    assert np.allclose(rep.delta_psnr, rep.bpp_grid - 2.0, atol=1e-9)
    # matched PSNR: bpp_a = (p-30)/2, bpp_b = (p-28)/3
    pa = (rep.psnr_grid - 30) / 2
    pb = (rep.psnr_grid - 28) / 3
    keep = (pa >= 1) & (pa <= 4) & (pb >= 1) & (pb <= 4)
    assert np.allclose(rep.delta_bpp_percent[keep], 100 * (pb[keep] - pa[keep]) / pa[keep],
                       atol=1e-9)


def test_compare_antisymmetry():
    rng = np.random.default_rng(7)
    bpp = np.sort(rng.uniform(0.5, 4.0, 5))
    a = _line_curve(range(5), bpp, np.sort(rng.uniform(28, 40, 5)))
    b = _line_curve(range(5), bpp + 0.1, np.sort(rng.uniform(28, 40, 5)))
    ab = evaluation.compare_curves(a, b)
    ba = evaluation.compare_curves(b, a)
    assert np.allclose(ab.delta_psnr, -ba.delta_psnr)


def test_compare_disjoint_ranges_errors():
    a = _line_curve([10, 20], [1.0, 2.0], [30.0, 32.0])
    b = _line_curve([10, 20], [5.0, 6.0], [40.0, 42.0])
    with pytest.raises(ValueError):
        evaluation.compare_curves(a, b)


def test_emit_csv_single_row_and_empty_optionals():
    curve = RdCurve([RdPoint(50, 1.2345678, 33.333333)])
    text = evaluation.emit_csv(curve, None)
    lines = text.strip().splitlines()
    assert len(lines) == 2
    assert lines[0] == "q,bpp_actual,bpp_estimated,psnr,accuracy"
    assert lines[1] == "50,1.23457,,33.3333,"


def test_csv_round_trip_six_significant_digits():
    curve = RdCurve([
        RdPoint(10, 0.987654321, 29.87654321, 1.23456789, 0.5),
        RdPoint(90, 3.141592653, math.inf, None, None),
    ])
    text = evaluation.emit_csv(curve, None)
    back = evaluation.read_curve_csv(io.StringIO(text))
    assert back.points[0].q == 10
    assert abs(back.points[0].bpp_actual - 0.987654321) < 1e-6
    assert abs(back.points[0].bpp_estimated - 1.23456789) < 1e-5
    assert back.points[1].psnr == 99.0  # infinity capped in CSV
    assert back.points[1].bpp_estimated is None
    assert back.points[1].accuracy is None


def test_emit_csv_writes_file(tmp_path):
    curve = RdCurve([RdPoint(50, 2.0, 35.0)])
    path = tmp_path / "curve.csv"
    evaluation.emit_csv(curve, path)
    assert evaluation.read_curve_csv(path).points[0].bpp_actual == 2.0


def test_report_json_round_trip(tmp_path):
    a = _line_curve([10, 50, 90], [1.0, 2.0, 3.0], [30.0, 35.0, 40.0])
    b = _line_curve([10, 50, 90], [1.1, 2.1, 3.1], [30.5, 35.5, 40.5])
    rep = evaluation.compare_curves(a, b)
    import json
    payload = json.loads(evaluation.report_json(rep, tmp_path / "rep.json"))
    assert payload["max_delta_psnr"] == rep.max_delta_psnr
    assert (tmp_path / "rep.json").exists()


def test_estimate_vs_actual_rows(mini_trained):
    corpus = mini_trained["corpus"][:3]
    rows = evaluation.estimate_vs_actual(mini_trained["tables"], corpus, [10, 50, 90],
                                         "420", mini_trained["eset"])
    assert len(rows) == 9
    r = evaluation.pearson([e for _, e, _ in rows], [a for _, _, a in rows])
    assert r > 0.8  # trained estimator tracks actual rate
    text = evaluation.scatter_csv(rows)
    assert text.splitlines()[0] == "q,bpp_estimated,bpp_actual"
