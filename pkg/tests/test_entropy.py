"""Bit-rate estimator: monotone cumulative, code lengths, gradients, DPCM."""

import numpy as np
import pytest

from jpegtune import diffproxy, entropy
from jpegtune.codec import default_tables, encode_measure, scale_table
from tests.conftest import natural_image, rel_err


def _perturbed_model(seed, scale=0.5):
    m = entropy.init_density_model(np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1)
    for arrs in (m.matrices, m.biases, m.gates):
        for a in arrs:
            a += rng.standard_normal(a.shape) * scale
    return m


def _fit_model(samples, seed=0, steps=1200, lr=3e-2):
    """Small Adam fit of one density model to a sample stream (noise-relaxed)."""
    m = entropy.init_density_model(np.random.default_rng(seed))
    mom = entropy.DensityModelParams.zeros_like(m)
    vel = entropy.DensityModelParams.zeros_like(m)
    rng = np.random.default_rng(seed + 1)
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, steps + 1):
        batch = samples[rng.integers(0, len(samples), size=256)]
        noisy = batch + rng.uniform(-0.5, 0.5, size=batch.shape)
        g = entropy.DensityModelParams.zeros_like(m)
        entropy.bits_for_values(m, noisy, want_value_grads=False, grads=g)
        for attr in ("matrices", "biases", "gates"):
            for k in range(len(getattr(m, attr))):
                gk = getattr(g, attr)[k] / len(batch)
                mk, vk = getattr(mom, attr)[k], getattr(vel, attr)[k]
                mk *= b1
                mk += (1 - b1) * gk
                vk *= b2
                vk += (1 - b2) * gk * gk
                getattr(m, attr)[k] -= lr * (mk / (1 - b1**t)) / (np.sqrt(vk / (1 - b2**t)) + eps)
    return m


def test_cumulative_monotone_for_random_parameters():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        m = entropy.init_density_model(rng)
        for arrs in (m.matrices, m.biases, m.gates):
            for a in arrs:
                a += rng.standard_normal(a.shape) * 2.0
        x = np.sort(rng.uniform(-50, 50, 32))
        c = entropy.cumulative(m, x)
        assert np.all(np.diff(c) >= -1e-15)
        assert np.all((c >= 0.0) & (c <= 1.0))


def test_initialized_cumulative_is_centered():
    m = entropy.init_density_model(np.random.default_rng(0))
    assert abs(float(entropy.cumulative(m, 0.0)[0]) - 0.5) < 0.05


def test_trained_cumulative_limits():
    samples = np.random.default_rng(2).laplace(0, 3, size=4000).round()
    m = _fit_model(samples, seed=4, steps=600)
    assert float(entropy.cumulative(m, -1e6)[0]) < 1e-3
    assert float(entropy.cumulative(m, 1e6)[0]) > 1 - 1e-3


def test_peaked_model_charges_zero_bits_for_its_bin():
    # scale weights up: cumulative ramps entirely inside (-0.5, 0.5),
    # putting probability ~1 on the zero bin
    m = entropy.init_density_model(np.random.default_rng(1))
    for a in m.matrices:
        a += 3.0
    bits, _ = entropy.bits_for_values(m, np.array([0.0]))
    assert bits[0] < 1e-3


def test_uniform_eight_bin_fit_costs_three_bits():
    rng = np.random.default_rng(6)
    samples = rng.integers(-4, 4, size=6000).astype(float)
    m = _fit_model(samples, seed=5)
    bits, _ = entropy.bits_for_values(m, np.arange(-4, 4).astype(float))
    assert abs(bits.mean() - 3.0) < 0.15  # closed-form entropy log2(8)


def test_probability_floor_bounds_bits():
    m = entropy.init_density_model(np.random.default_rng(7))
    for a in m.matrices:
        a += 3.0  # peaked: distant bins go below the floor
    bits, dv = entropy.bits_for_values(m, np.array([1e5]))
    assert bits[0] <= -np.log2(entropy.PROB_FLOOR) + 1e-9
    assert dv[0] == 0.0  # floored bins carry no gradient


def test_bits_value_gradient_matches_fd():
    m = _perturbed_model(11)
    v = np.array([0.0, 0.4, -1.7, 3.3, -8.8, 21.0])
    _, dv = entropy.bits_for_values(m, v)
    h = 1e-5
    up, _ = entropy.bits_for_values(m, v + h, want_value_grads=False)
    down, _ = entropy.bits_for_values(m, v - h, want_value_grads=False)
    fd = (up - down) / (2 * h)
    assert max(rel_err(a, b) for a, b in zip(fd, dv)) < 1e-4


def test_bits_parameter_gradients_match_fd():
    m = _perturbed_model(13)
    v = np.array([0.2, -0.9, 2.6, -5.0])
    g = entropy.DensityModelParams.zeros_like(m)
    entropy.bits_for_values(m, v, want_value_grads=False, grads=g)
    h = 1e-5
    worst = 0.0
    for attr in ("matrices", "biases", "gates"):
        for k, arr in enumerate(getattr(m, attr)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + h
                up = entropy.bits_for_values(m, v, want_value_grads=False)[0].sum()
                arr[idx] = old - h
                down = entropy.bits_for_values(m, v, want_value_grads=False)[0].sum()
                arr[idx] = old
                worst = max(worst, rel_err((up - down) / (2 * h), getattr(g, attr)[k][idx]))
    assert worst < 1e-4


def _planes(y, cb, cr, layout="444", w=8, h=8):
    return diffproxy.SoftQuantizedCoeffs(np.asarray(y, float), np.asarray(cb, float),
                                         np.asarray(cr, float), layout, w, h)


def test_single_zero_block_structure():
    eset = entropy.init_estimator_set(seed=3)
    zeros = np.zeros((1, 1, 8, 8))
    est = entropy.estimate_bits_image(_planes(zeros, zeros, zeros), eset,
                                      want_coeff_grads=False, want_param_grads=False)
    dc_y = entropy.bits_for_values(eset.luma_dc, np.array([0.0]))[0][0]
    ac_y = entropy.bits_for_values(eset.luma_ac, np.array([0.0]))[0][0]
    assert abs(est.channel_bits["y"] - (dc_y + 63 * ac_y)) < 1e-9


def test_identical_blocks_use_zero_dpcm_difference():
    eset = entropy.init_estimator_set(seed=4)
    one = np.zeros((1, 1, 8, 8))
    one[0, 0, 0, 0] = 9.0
    two = np.tile(one, (1, 2, 1, 1))
    zeros1, zeros2 = np.zeros((1, 1, 8, 8)), np.zeros((1, 2, 8, 8))
    b1 = entropy.estimate_bits_image(_planes(one, zeros1, zeros1), eset,
                                     want_coeff_grads=False, want_param_grads=False)
    b2 = entropy.estimate_bits_image(_planes(two, zeros2, zeros2, w=16), eset,
                                     want_coeff_grads=False, want_param_grads=False)
    dc0 = entropy.bits_for_values(eset.luma_dc, np.array([0.0]))[0][0]
    ac0 = entropy.bits_for_values(eset.luma_ac, np.array([0.0]))[0][0]
    # second block adds: DC diff of exactly 0, plus 63 zero-bin AC values
    assert abs((b2.channel_bits["y"] - b1.channel_bits["y"]) - (dc0 + 63 * ac0)) < 1e-9


def test_estimate_coeff_gradients_match_fd():
    rng = np.random.default_rng(15)
    eset = entropy.init_estimator_set(seed=5)
    arrs = {ch: rng.uniform(-6, 6, size=(1, 2, 8, 8)) for ch in ("y", "cb", "cr")}
    sc = _planes(arrs["y"], arrs["cb"], arrs["cr"], w=16)
    est = entropy.estimate_bits_image(sc, eset, want_param_grads=False)
    h = 1e-5
    worst = 0.0
    for _ in range(40):
        ch = ("y", "cb", "cr")[rng.integers(0, 3)]
        idx = tuple(int(rng.integers(0, s)) for s in arrs[ch].shape)
        for sign in (1, -1):
            arrs[ch][idx] += sign * h
            val = entropy.estimate_bits_image(
                _planes(arrs["y"], arrs["cb"], arrs["cr"], w=16), eset,
                want_coeff_grads=False, want_param_grads=False).bits
            arrs[ch][idx] -= sign * h
            if sign == 1:
                up = val
            else:
                down = val
        worst = max(worst, rel_err((up - down) / (2 * h), est.coeff_grads[ch][idx]))
    assert worst < 1e-3


def test_add_uniform_noise_statistics_and_determinism():
    rng_draws = np.random.default_rng(0).uniform(-0.5, 0.5, size=1_000_000)
    assert -0.002 < rng_draws.mean() < 0.002  # statistical oracle for the noise law
    base = np.zeros((4, 4, 8, 8))
    sc = _planes(base, base, base, w=32, h=32)
    n1 = entropy.add_uniform_noise(sc, 42)
    n2 = entropy.add_uniform_noise(sc, 42)
    assert np.array_equal(n1.y, n2.y) and np.array_equal(n1.cr, n2.cr)
    allv = np.concatenate([n1.y.ravel(), n1.cb.ravel(), n1.cr.ravel()])
    assert allv.min() > -0.5 and allv.max() < 0.5
    assert -0.05 < allv.mean() < 0.05
    n3 = entropy.add_uniform_noise(sc, 43)
    assert not np.array_equal(n1.y, n3.y)


def test_checkpoint_round_trip(tmp_path):
    eset = entropy.init_estimator_set(seed=9)
    for arrs in (eset.luma_ac.matrices, eset.chroma_dc.gates):
        for a in arrs:
            a += np.random.default_rng(1).standard_normal(a.shape)
    path = tmp_path / "entropy.json"
    entropy.save_estimator_set(eset, path)
    back = entropy.load_estimator_set(path)
    for name in entropy.MODEL_NAMES:
        m1, m2 = eset.model(name), back.model(name)
        for attr in ("matrices", "biases", "gates"):
            for a, b in zip(getattr(m1, attr), getattr(m2, attr)):
                assert np.array_equal(a, b)
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        entropy.load_estimator_set(path)


def test_normalization_after_training(mini_trained):
    bins = np.arange(-2048, 2049).astype(float)
    for name in entropy.MODEL_NAMES:
        m = mini_trained["eset"].model(name)
        mass = float(np.sum(entropy.cumulative(m, bins + 0.5) - entropy.cumulative(m, bins - 0.5)))
        assert 0.999 <= mass <= 1.0 + 1e-9


def test_doubling_tables_does_not_increase_estimate(mini_trained):
    eset = mini_trained["eset"]
    p = mini_trained["tables"]
    p2 = p.copy()
    p2.luma *= 10.0
    p2.chroma *= 10.0
    rng = np.random.default_rng(77)
    wins = 0
    n = 50
    for _ in range(n):
        img = natural_image(rng, 64)
        _, s1, _ = diffproxy.forward(img, p, 50, "420", "soft")
        _, s2, _ = diffproxy.forward(img, p2, 50, "420", "soft")
        b1 = entropy.estimate_bits_image(s1, eset, want_coeff_grads=False,
                                         want_param_grads=False).bits
        b2 = entropy.estimate_bits_image(s2, eset, want_coeff_grads=False,
                                         want_param_grads=False).bits
        wins += b2 <= b1
    assert wins >= 0.9 * n


def test_rate_estimate_within_factor_two_of_actual(mini_trained):
    # evaluated at a size where the fixed file header is amortized
    eset = mini_trained["eset"]
    p = mini_trained["tables"]
    rng = np.random.default_rng(88)
    for _ in range(4):
        img = natural_image(rng, 160)
        npix = img.shape[0] * img.shape[1]
        for q in (10, 30, 50, 70, 90):
            actual = encode_measure(img, p, q, "420").bpp
            _, soft, _ = diffproxy.forward(img, p, q, "420", "hard")
            est = entropy.estimate_bits_image(soft, eset, want_coeff_grads=False,
                                              want_param_grads=False).bits / npix
            assert 0.5 * actual <= est <= 2.0 * actual, (q, est, actual)
