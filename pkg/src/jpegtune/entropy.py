"""Learned differentiable bit-rate estimator for quantized DCT coefficients.

Four univariate density models (luma/chroma x DC/AC) assign each quantized
coefficient a code length of -log2 P(bin). Each model is a monotone
cumulative built from four stacked transforms: an affine map with weights
made positive through softplus, then a tanh-gated residual on the hidden
layers, with a sigmoid squashing the final scalar. Monotonicity holds for
any parameter values, so the bin probabilities are always non-negative.

DC coefficients are coded through DPCM differences in raster block order;
Cb and Cr share the chroma models but keep separate DC predictors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FILTERS = (1, 3, 3, 3, 1)  # scalar in, three 3-channel hidden layers, scalar out
PROB_FLOOR = 1e-9
LN2 = float(np.log(2.0))

ENTROPY_CKPT_FORMAT = "jpegtune-entropy-v1"
MODEL_NAMES = ("luma_dc", "luma_ac", "chroma_dc", "chroma_ac")


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class DensityModelParams:
    """Raw (unconstrained) parameters of one cumulative density model."""

    matrices: list[np.ndarray]  # 4 weight matrices, positive via softplus at use
    biases: list[np.ndarray]  # 4 bias vectors
    gates: list[np.ndarray]  # 3 gate vectors (hidden layers), used via tanh

    def copy(self) -> "DensityModelParams":
        return DensityModelParams(
            [m.copy() for m in self.matrices],
            [b.copy() for b in self.biases],
            [g.copy() for g in self.gates],
        )

    @staticmethod
    def zeros_like(other: "DensityModelParams") -> "DensityModelParams":
        return DensityModelParams(
            [np.zeros_like(m) for m in other.matrices],
            [np.zeros_like(b) for b in other.biases],
            [np.zeros_like(g) for g in other.gates],
        )


def init_density_model(rng: np.random.Generator, init_scale: float = 10.0) -> DensityModelParams:
    """Near-linear start: the cumulative ramps over roughly +-init_scale.

    Weights are set so the product of layer slopes is 1/init_scale; small
    random biases break the symmetry between hidden channels (identical
    channels would receive identical gradients forever). Gates start at
    zero, so cumulative(0) stays close to 0.5.
    """
    scale = init_scale ** (1.0 / (len(FILTERS) - 1))
    matrices, biases, gates = [], [], []
    for k in range(len(FILTERS) - 1):
        f_in, f_out = FILTERS[k], FILTERS[k + 1]
        init = np.log(np.expm1(1.0 / (scale * f_out)))
        matrices.append(np.full((f_out, f_in), init))
        biases.append(rng.uniform(-0.1, 0.1, size=f_out))
        if k < len(FILTERS) - 2:
            gates.append(np.zeros(f_out))
    biases[-1] = np.zeros(FILTERS[-1])  # keep cumulative(0) ~ 0.5
    return DensityModelParams(matrices, biases, gates)


def _logits_forward(params: DensityModelParams, x: np.ndarray):
    """Evaluate cumulative logits at x (N,); returns (logits, cache)."""
    u = x[:, None]
    cache = []
    n_layers = len(params.matrices)
    for k in range(n_layers):
        w = _softplus(params.matrices[k])
        zpre = u @ w.T + params.biases[k]
        if k < n_layers - 1:
            tz = np.tanh(zpre)
            g = np.tanh(params.gates[k])
            cache.append((u, w, zpre, tz))
            u = zpre + g * tz
        else:
            cache.append((u, w, zpre, None))
            u = zpre
    return u[:, 0], cache


def _logits_backward(params: DensityModelParams, cache, upstream: np.ndarray,
                     grads: DensityModelParams | None):
    """Backprop upstream (N,) through the logits; returns grad w.r.t. x.

    When `grads` is given, parameter gradients are accumulated into it.
    """
    du = upstream[:, None]
    n_layers = len(params.matrices)
    for k in range(n_layers - 1, -1, -1):
        u_in, w, zpre, tz = cache[k]
        if k < n_layers - 1:
            g = np.tanh(params.gates[k])
            dzpre = du * (1.0 + g * (1.0 - tz * tz))
            if grads is not None:
                grads.gates[k] += np.einsum("nf,nf->f", du, tz) * (1.0 - g * g)
        else:
            dzpre = du
        if grads is not None:
            grads.matrices[k] += np.einsum("no,ni->oi", dzpre, u_in) * _sigmoid(params.matrices[k])
            grads.biases[k] += dzpre.sum(axis=0)
        du = dzpre @ w
    return du[:, 0]


def cumulative(params: DensityModelParams, x) -> np.ndarray:
    """Monotone cumulative distribution evaluated at x."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    logits, _ = _logits_forward(params, x)
    return _sigmoid(logits)


def bits_for_values(params: DensityModelParams, v,
                    want_value_grads: bool = True,
                    grads: DensityModelParams | None = None):
    """Code length -log2[ C(v + 1/2) - C(v - 1/2) ] per value, with gradients.

    Returns (bits (N,), dbits_dv (N,) or None). The probability of each bin
    is floored at PROB_FLOOR before the log; floored bins carry no gradient.
    Parameter gradients (of the summed bits) accumulate into `grads`.
    """
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    n = v.shape[0]
    both = np.concatenate([v + 0.5, v - 0.5])
    logits, cache = _logits_forward(params, both)
    y = _sigmoid(logits)
    prob_raw = y[:n] - y[n:]
    prob = np.maximum(prob_raw, PROB_FLOOR)
    bits = -np.log2(prob)

    if not want_value_grads and grads is None:
        return bits, None

    dbits_dprob = np.where(prob_raw > PROB_FLOOR, -1.0 / (prob * LN2), 0.0)
    sig_grad = y * (1.0 - y)
    upstream = np.concatenate([dbits_dprob, -dbits_dprob]) * sig_grad
    dv_both = _logits_backward(params, cache, upstream, grads)
    dbits_dv = dv_both[:n] + dv_both[n:] if want_value_grads else None
    return bits, dbits_dv


def bits_for_value(params: DensityModelParams, v: float):
    """Scalar convenience wrapper: (bits, dbits/dv, parameter gradients)."""
    grads = DensityModelParams.zeros_like(params)
    bits, dv = bits_for_values(params, np.array([v]), grads=grads)
    return float(bits[0]), float(dv[0]), grads


@dataclass
class EntropyEstimatorSet:
    """The four density models of the bit-rate estimator."""

    luma_dc: DensityModelParams
    luma_ac: DensityModelParams
    chroma_dc: DensityModelParams
    chroma_ac: DensityModelParams

    def model(self, name: str) -> DensityModelParams:
        return getattr(self, name)

    def copy(self) -> "EntropyEstimatorSet":
        return EntropyEstimatorSet(*(self.model(n).copy() for n in MODEL_NAMES))


def init_estimator_set(seed: int = 0) -> EntropyEstimatorSet:
    rng = np.random.default_rng(seed)
    return EntropyEstimatorSet(*(init_density_model(rng) for _ in MODEL_NAMES))


@dataclass
class EstimateResult:
    """Total estimated bits plus the gradients needed up- and down-stream."""

    bits: float
    channel_bits: dict[str, float]
    coeff_grads: dict[str, np.ndarray] | None
    param_grads: dict[str, DensityModelParams] | None


def _dpcm(dc: np.ndarray) -> np.ndarray:
    diffs = np.empty_like(dc)
    diffs[0] = dc[0]  # predecessor of the first block is defined as 0
    diffs[1:] = dc[1:] - dc[:-1]
    return diffs


def _dpcm_grad(gdiff: np.ndarray) -> np.ndarray:
    g = np.empty_like(gdiff)
    g[:-1] = gdiff[:-1] - gdiff[1:]
    g[-1] = gdiff[-1]
    return g


def estimate_bits_image(coeffs, eset: EntropyEstimatorSet,
                        want_coeff_grads: bool = True,
                        want_param_grads: bool = True) -> EstimateResult:
    """Estimated bits for one image's table-normalized coefficients.

    `coeffs` provides channels() like SoftQuantizedCoeffs/CoeffPlanes; DC
    values are DPCM-differenced in raster block order per channel before
    entering the DC models. Cb and Cr share the chroma models (their values
    run through them as one batch) but keep separate DC predictors.
    """
    param_grads = (
        {n: DensityModelParams.zeros_like(eset.model(n)) for n in MODEL_NAMES}
        if want_param_grads else None
    )
    coeff_grads = {} if want_coeff_grads else None
    channel_bits = {"y": 0.0, "cb": 0.0, "cr": 0.0}
    flats = {}
    for ch, arr in coeffs.channels():
        arr = np.asarray(arr, dtype=np.float64)
        flats[ch] = arr.reshape(arr.shape[0] * arr.shape[1], 64)

    groups = {
        "luma_dc": ("dc", ("y",)),
        "luma_ac": ("ac", ("y",)),
        "chroma_dc": ("dc", ("cb", "cr")),
        "chroma_ac": ("ac", ("cb", "cr")),
    }
    results: dict[str, dict[str, np.ndarray]] = {ch: {} for ch in flats}
    for model_name, (kind, chans) in groups.items():
        if kind == "dc":
            segs = [_dpcm(flats[ch][:, 0]) for ch in chans]
        else:
            segs = [flats[ch][:, 1:].ravel() for ch in chans]
        values = np.concatenate(segs) if len(segs) > 1 else segs[0]
        bits, dv = bits_for_values(
            eset.model(model_name), values, want_value_grads=want_coeff_grads,
            grads=param_grads[model_name] if param_grads else None,
        )
        offset = 0
        for ch, seg in zip(chans, segs):
            n = seg.shape[0]
            channel_bits[ch] += float(bits[offset : offset + n].sum())
            if want_coeff_grads:
                results[ch][kind] = dv[offset : offset + n]
            offset += n

    if want_coeff_grads:
        for ch, flat in flats.items():
            nblocks = flat.shape[0]
            g = np.zeros((nblocks, 64))
            g[:, 0] = _dpcm_grad(results[ch]["dc"])
            g[:, 1:] = results[ch]["ac"].reshape(nblocks, 63)
            shape = dict(coeffs.channels())[ch].shape
            coeff_grads[ch] = g.reshape(shape)

    total = float(sum(channel_bits.values()))
    return EstimateResult(total, channel_bits, coeff_grads, param_grads)


def fit_param_grads(coeffs, eset: EntropyEstimatorSet, rng: np.random.Generator,
                    ac_fraction: float = 0.25) -> dict[str, DensityModelParams]:
    """Parameter gradients of the summed code length, for density fitting.

    Used on the noise-relaxed coefficient stream during training. AC values
    are randomly subsampled (seeded, unbiased: gradients rescale by the
    inverse keep fraction) since a fraction of the tens of thousands of
    draws per image already gives a solid stochastic gradient. DC values
    are few and always kept.
    """
    grads = {n: DensityModelParams.zeros_like(eset.model(n)) for n in MODEL_NAMES}
    flats = {}
    for ch, arr in coeffs.channels():
        arr = np.asarray(arr, dtype=np.float64)
        flats[ch] = arr.reshape(arr.shape[0] * arr.shape[1], 64)

    for model_name, kind, chans in (
        ("luma_dc", "dc", ("y",)),
        ("luma_ac", "ac", ("y",)),
        ("chroma_dc", "dc", ("cb", "cr")),
        ("chroma_ac", "ac", ("cb", "cr")),
    ):
        if kind == "dc":
            values = np.concatenate([_dpcm(flats[ch][:, 0]) for ch in chans])
            scale = 1.0
        else:
            values = np.concatenate([flats[ch][:, 1:].ravel() for ch in chans])
            total = values.shape[0]
            keep = max(1, int(round(ac_fraction * total)))
            values = values[rng.integers(0, total, size=keep)]
            scale = total / keep
        g = DensityModelParams.zeros_like(eset.model(model_name))
        bits_for_values(eset.model(model_name), values, want_value_grads=False, grads=g)
        tgt = grads[model_name]
        for attr in ("matrices", "biases", "gates"):
            for k, arr in enumerate(getattr(g, attr)):
                getattr(tgt, attr)[k] += scale * arr
    return grads


def add_uniform_noise(coeffs, seed):
    """Relax quantization: add i.i.d. uniform(-1/2, 1/2) to every coefficient.

    `seed` may be an int or a Generator; a fixed seed reproduces the stream.
    Returns an object of the same type with perturbed channel arrays.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noisy = {}
    for ch, arr in coeffs.channels():
        noisy[ch] = arr + rng.uniform(-0.5, 0.5, size=arr.shape)
    return type(coeffs)(noisy["y"], noisy["cb"], noisy["cr"],
                        coeffs.layout, coeffs.width, coeffs.height)


# -- parameter flattening (for the optimizer) and checkpoints ---------------

def set_to_flat(eset: EntropyEstimatorSet) -> dict[str, np.ndarray]:
    flat = {}
    for name in MODEL_NAMES:
        m = eset.model(name)
        for i, arr in enumerate(m.matrices):
            flat[f"{name}.H{i}"] = arr
        for i, arr in enumerate(m.biases):
            flat[f"{name}.b{i}"] = arr
        for i, arr in enumerate(m.gates):
            flat[f"{name}.a{i}"] = arr
    return flat


def grads_to_flat(grads: dict[str, DensityModelParams]) -> dict[str, np.ndarray]:
    flat = {}
    for name in MODEL_NAMES:
        g = grads[name]
        for i, arr in enumerate(g.matrices):
            flat[f"{name}.H{i}"] = arr
        for i, arr in enumerate(g.biases):
            flat[f"{name}.b{i}"] = arr
        for i, arr in enumerate(g.gates):
            flat[f"{name}.a{i}"] = arr
    return flat


def save_estimator_set(eset: EntropyEstimatorSet, path: str | Path):
    payload = {"format": ENTROPY_CKPT_FORMAT, "models": {}}
    for name in MODEL_NAMES:
        m = eset.model(name)
        payload["models"][name] = {
            "matrices": [a.tolist() for a in m.matrices],
            "biases": [a.tolist() for a in m.biases],
            "gates": [a.tolist() for a in m.gates],
        }
    Path(path).write_text(json.dumps(payload))


def load_estimator_set(path: str | Path) -> EntropyEstimatorSet:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != ENTROPY_CKPT_FORMAT:
        raise ValueError(f"unrecognized entropy checkpoint format: {payload.get('format')!r}")
    models = {}
    for name in MODEL_NAMES:
        m = payload["models"][name]
        models[name] = DensityModelParams(
            [np.array(a, dtype=np.float64) for a in m["matrices"]],
            [np.array(a, dtype=np.float64) for a in m["biases"]],
            [np.array(a, dtype=np.float64) for a in m["gates"]],
        )
    return EntropyEstimatorSet(**models)
