"""Mini-batch Adam optimization of quantization tables and entropy models.

The joint objective per image and sampled quality factor is
c_r * bits/pixel + c_d * squared-error/pixel + c_c * cross-entropy.
Both rate and distortion are normalized per pixel so the weight settings
stay meaningful across image sizes. The rate term consumes the
soft-rounded coefficients (so its gradient reaches the tables), while the
entropy-model parameters are fitted on the uniform-noise relaxation of the
same coefficients, computed from the same forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffproxy, entropy, taskloss
from .dataset import normalize_corpus
from .codec.quantize import QuantTablePair, default_tables, scale_table
from .diffproxy import TableGradients

# Distortion unit: per-pixel summed-RGB squared error divided by this
# constant. Calibrated so that c_r = c_d = 1 balances the two pulls at the
# operating point where rate-distortion training reproduces the known table
# signature (low-frequency luma entries drift up slightly, high-frequency
# and chroma entries drop); without it the distortion pull is ~2 orders of
# magnitude stronger and every low-frequency entry saturates at the floor.
DISTORTION_SCALE = 100.0


@dataclass
class LossWeights:
    """(c_r, c_d, c_c): rate, distortion, and classification weights."""

    c_r: float = 1.0
    c_d: float = 1.0
    c_c: float = 0.0

    def __post_init__(self):
        if self.c_r < 0 or self.c_d < 0 or self.c_c < 0:
            raise ValueError("loss weights must be non-negative")
        if self.c_r == 0 and self.c_d == 0 and self.c_c == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 4
    lr: float = 1e-4
    q_choices: tuple[int, ...] = tuple(range(10, 91))
    layout: str = "420"
    seed: int = 0
    mode: str = "universal"  # or "per-image"
    finetune_entropy: bool = False  # per-image mode: keep entropy models frozen
    init_tables: QuantTablePair | None = None

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not self.q_choices:
            raise ValueError("quality-factor set must be non-empty")
        if any(not 1 <= q <= 100 for q in self.q_choices):
            raise ValueError("quality factors must lie in [1, 100]")
        if self.layout not in ("420", "444"):
            raise ValueError(f"unsupported layout {self.layout!r}")


@dataclass
class AdamState:
    """First/second moment accumulators for a named family of arrays."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float):
    """One bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1**state.t)
        vhat = v / (1 - b2**state.t)
        p -= lr * mhat / (np.sqrt(vhat) + state.eps)


@dataclass
class TotalLossResult:
    total: float
    rate_bpp: float
    distortion: float  # per-pixel squared error in calibrated units
    task: float
    table_grads: TableGradients
    entropy_grads: dict[str, entropy.DensityModelParams] | None


def total_loss(x: np.ndarray, y: int | None, p: QuantTablePair,
               eset: entropy.EntropyEstimatorSet, q: int, weights: LossWeights,
               layout: str = "420", classifier: taskloss.ToyClassifierParams | None = None,
               noise_rng: np.random.Generator | int | None = 0,
               fit_entropy: bool = True) -> TotalLossResult:
    """Soft-mode forward plus all three loss terms and their gradients.

    `fit_entropy=False` skips the density-fitting gradients (used when the
    entropy models are frozen).
    """
    if weights.c_c > 0:
        if y is None:
            raise ValueError("classification weight c_c > 0 requires a label")
        if classifier is None:
            raise ValueError("classification weight c_c > 0 requires a classifier")
    recon, soft_coeffs, tape = diffproxy.forward(x, p, q, layout, mode="soft")
    h, w = x.shape[:2]
    npix = float(h * w)

    total = 0.0
    rate_bpp = 0.0
    dist_pp = 0.0
    task = 0.0
    grad_recon = None
    grad_zhat = None
    eparam_grads = None

    if weights.c_d > 0:
        dsum, dgrad = diffproxy.distortion_loss(x, recon)
        dist_pp = dsum / (npix * DISTORTION_SCALE)
        total += weights.c_d * dist_pp
        grad_recon = (weights.c_d / (npix * DISTORTION_SCALE)) * dgrad

    if weights.c_c > 0:
        closs, cgrad = taskloss.task_loss(recon, int(y), classifier)
        task = closs
        total += weights.c_c * closs
        grad_recon = weights.c_c * cgrad if grad_recon is None else grad_recon + weights.c_c * cgrad

    if weights.c_r > 0:
        est = entropy.estimate_bits_image(soft_coeffs, eset, want_param_grads=False)
        rate_bpp = est.bits / npix
        total += weights.c_r * rate_bpp
        cr = weights.c_r / npix
        grad_zhat = {ch: cr * g for ch, g in est.coeff_grads.items()}
        if fit_entropy:
            # Entropy parameters fit the noise-relaxed stream (same forward
            # pass, no gradient back to the tables through this branch).
            rng = (noise_rng if isinstance(noise_rng, np.random.Generator)
                   else np.random.default_rng(noise_rng))
            noisy = entropy.add_uniform_noise(tape.normalized_planes(), rng)
            eparam_grads = entropy.fit_param_grads(noisy, eset, rng)
            for g in eparam_grads.values():
                for attr in ("matrices", "biases", "gates"):
                    for k in range(len(getattr(g, attr))):
                        getattr(g, attr)[k] *= cr

    table_grads = diffproxy.backward(tape, grad_recon, grad_zhat)
    return TotalLossResult(total, rate_bpp, dist_pp, task, table_grads, eparam_grads)


@dataclass
class TraceRow:
    step: int
    total: float
    rate: float
    distortion: float
    task: float


def _accumulate_entropy_grads(acc, new, scale):
    for name, g in new.items():
        tgt = acc[name]
        for attr in ("matrices", "biases", "gates"):
            for k, arr in enumerate(getattr(g, attr)):
                getattr(tgt, attr)[k] += scale * arr


def universal_train(corpus, config: TrainConfig, weights: LossWeights,
                    eset: entropy.EntropyEstimatorSet | None = None,
                    classifier: taskloss.ToyClassifierParams | None = None,
                    entropy_frozen: bool = False,
                    ) -> tuple[QuantTablePair, entropy.EntropyEstimatorSet, list[TraceRow]]:
    """Jointly optimize the tables (and entropy models) over a corpus.

    Each step draws `batch_size` images with replacement and one quality
    factor per image, averages the gradients, applies one Adam step, and
    projects the tables back to entries >= 1. Deterministic for a fixed
    (corpus, config, seed).
    """
    records = normalize_corpus(corpus)
    p = (config.init_tables or default_tables()).copy()
    if eset is None:
        eset = entropy.init_estimator_set(seed=config.seed + 1)
    else:
        eset = eset.copy()

    rng = np.random.default_rng(config.seed)
    q_choices = np.asarray(config.q_choices)
    table_params = {"luma": p.luma, "chroma": p.chroma}
    table_state = AdamState()
    eflat = entropy.set_to_flat(eset)
    estate = AdamState()
    trace: list[TraceRow] = []
    train_entropy = weights.c_r > 0 and not entropy_frozen

    for step in range(config.steps):
        idx = rng.integers(0, len(records), size=config.batch_size)
        qs = q_choices[rng.integers(0, len(q_choices), size=config.batch_size)]
        tgrad = TableGradients.zeros()
        egrad_acc = {n: entropy.DensityModelParams.zeros_like(eset.model(n))
                     for n in entropy.MODEL_NAMES} if train_entropy else None
        tot = rate = dist = task = 0.0
        inv = 1.0 / config.batch_size
        for i, qi in zip(idx, qs):
            img, label = records[i]
            res = total_loss(img, label, p, eset, int(qi), weights, config.layout,
                             classifier=classifier, noise_rng=rng,
                             fit_entropy=train_entropy)
            if not np.isfinite(res.total):
                raise RuntimeError(
                    f"non-finite loss at step {step}, image {int(i)}, q={int(qi)}: {res.total}")
            tot += inv * res.total
            rate += inv * res.rate_bpp
            dist += inv * res.distortion
            task += inv * res.task
            tgrad = tgrad + res.table_grads.scaled(inv)
            if train_entropy and res.entropy_grads is not None:
                _accumulate_entropy_grads(egrad_acc, res.entropy_grads, inv)
        adam_step(table_params, {"luma": tgrad.luma, "chroma": tgrad.chroma},
                  table_state, config.lr)
        np.maximum(p.luma, 1.0, out=p.luma)
        np.maximum(p.chroma, 1.0, out=p.chroma)
        if train_entropy:
            adam_step(eflat, entropy.grads_to_flat(egrad_acc), estate, config.lr)
        trace.append(TraceRow(step, tot, rate, dist, task))
    return p, eset, trace


def per_image_train(x: np.ndarray, y: int | None, config: TrainConfig,
                    weights: LossWeights, eset: entropy.EntropyEstimatorSet,
                    classifier: taskloss.ToyClassifierParams | None = None) -> QuantTablePair:
    """Fit a table pair to a single image.

    The pre-trained entropy models stay frozen unless the config asks for
    fine-tuning (a single image is too little data to refit them safely).
    """
    if weights.c_c > 0 and y is None:
        raise ValueError("classification weight c_c > 0 requires a label")
    p, _, _ = universal_train([(x, y)], config, weights, eset=eset,
                              classifier=classifier,
                              entropy_frozen=not config.finetune_entropy)
    return p


# -- table text format -------------------------------------------------------

def format_tables(p: QuantTablePair, header: str = "quantization tables") -> str:
    lines = [f"# {header}", "# luma"]
    for row in p.luma:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("# chroma")
    for row in p.chroma:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_tables(p: QuantTablePair, path: str | Path, header: str = "quantization tables"):
    Path(path).write_text(format_tables(p, header))


def read_tables(path: str | Path) -> QuantTablePair:
    values: list[float] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        values.extend(float(tok) for tok in line.split())
    if len(values) != 128:
        raise ValueError(f"expected 128 table entries, found {len(values)} in {path}")
    arr = np.array(values, dtype=np.float64)
    return QuantTablePair(arr[:64].reshape(8, 8), arr[64:].reshape(8, 8))


def export_tables(p: QuantTablePair, path: str | Path, q: int | None = None):
    """Write the float tables; with q, also the scaled integer pair.

    Returns the integer pair when q is given, else None. The integer file
    lands next to `path` with a `_q{q}` suffix.
    """
    path = Path(path)
    write_tables(p, path)
    if q is None:
        return None
    ints = scale_table(p, q)
    int_pair = QuantTablePair(ints.luma.astype(np.float64), ints.chroma.astype(np.float64))
    int_path = path.with_name(path.stem + f"_q{q}" + path.suffix)
    write_tables(int_pair, int_path, header=f"integer tables at quality {q}")
    return ints


def write_trace_csv(trace: list[TraceRow], path: str | Path):
    lines = ["step,total,rate,distortion,task"]
    for row in trace:
        lines.append(f"{row.step},{row.total:.6g},{row.rate:.6g},{row.distortion:.6g},{row.task:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")
