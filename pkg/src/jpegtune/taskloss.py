"""Differentiable classification loss with a built-in toy classifier.

The classifier is a softmax regression on the grid of 8x8-block means of
the luma plane. It is deliberately tiny: its only job is to make
rate-accuracy effects observable at desk scale. The companion synthetic
corpus keys each class to a distinct spatial frequency of the block-mean
field, so coarse quantization of the luma DC coefficient destroys the
discriminative signal while within-block texture stays pure nuisance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec.color import RGB_TO_YCBCR

CLASSIFIER_CKPT_FORMAT = "jpegtune-classifier-v1"
LUMA_WEIGHTS = RGB_TO_YCBCR[0]  # (0.299, 0.587, 0.114)


@dataclass
class ToyClassifierParams:
    """Linear map from block-mean features to class logits; frozen after training."""

    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    input_height: int
    input_width: int

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]


def softmax_xent(logits: np.ndarray, y: int) -> tuple[float, np.ndarray]:
    """Softmax cross entropy and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise ValueError("logits must be a vector over at least two classes")
    if not 0 <= y < logits.shape[0]:
        raise ValueError(f"label {y} out of range for {logits.shape[0]} classes")
    shifted = logits - logits.max()
    expv = np.exp(shifted)
    probs = expv / expv.sum()
    loss = -float(np.log(max(probs[y], 1e-300)))
    grad = probs.copy()
    grad[y] -= 1.0
    return loss, grad


def block_mean_features(z: np.ndarray) -> np.ndarray:
    """Mean of each non-overlapping 8x8 luma block, flattened row-major."""
    z = np.asarray(z, dtype=np.float64)
    h, w = z.shape[:2]
    if h % 8 or w % 8:
        raise ValueError(f"classifier input must be a multiple of 8, got {w}x{h}")
    luma = z @ LUMA_WEIGHTS
    return luma.reshape(h // 8, 8, w // 8, 8).mean(axis=(1, 3)).reshape(-1)


def block_mean_features_backward(grad_f: np.ndarray, h: int, w: int) -> np.ndarray:
    """Adjoint of block_mean_features: (n_features,) -> (h, w, 3)."""
    grid = grad_f.reshape(h // 8, w // 8) / 64.0
    luma_grad = np.kron(grid, np.ones((8, 8)))
    return luma_grad[:, :, None] * LUMA_WEIGHTS


def classify(params: ToyClassifierParams, z: np.ndarray) -> int:
    """Predicted class index for an image (real or uint8)."""
    logits = params.weights @ block_mean_features(z) + params.bias
    return int(np.argmax(logits))


def task_loss(z: np.ndarray, y: int, params: ToyClassifierParams) -> tuple[float, np.ndarray]:
    """Cross-entropy of the frozen classifier on z, with gradient w.r.t. z."""
    h, w = z.shape[:2]
    if (h, w) != (params.input_height, params.input_width):
        raise ValueError(
            f"classifier expects {params.input_width}x{params.input_height} input, got {w}x{h}")
    f = block_mean_features(z)
    logits = params.weights @ f + params.bias
    loss, glogits = softmax_xent(logits, y)
    grad_f = params.weights.T @ glogits
    return loss, block_mean_features_backward(grad_f, h, w)


def train_toy_classifier(corpus, seed: int = 0, steps: int = 400,
                         lr: float = 0.1, min_accuracy: float = 0.7) -> ToyClassifierParams:
    """Fit the softmax regression on (image, label) pairs with Adam.

    Deterministic under a fixed seed. Raises if the fit fails to reach
    `min_accuracy` on the training set instead of returning a bad model.
    """
    images = [np.asarray(img) for img, _ in corpus]
    labels = np.array([int(lab) for _, lab in corpus])
    if len(images) == 0:
        raise ValueError("empty training corpus")
    h, w = images[0].shape[:2]
    n_classes = max(2, int(labels.max()) + 1)
    feats = np.stack([block_mean_features(img) for img in images])

    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 1e-3, size=(n_classes, feats.shape[1]))
    bias = np.zeros(n_classes)
    m_w = np.zeros_like(weights); v_w = np.zeros_like(weights)
    m_b = np.zeros_like(bias); v_b = np.zeros_like(bias)
    b1, b2, eps = 0.9, 0.999, 1e-8
    onehot = np.zeros((len(labels), n_classes))
    onehot[np.arange(len(labels)), labels] = 1.0

    for t in range(1, steps + 1):
        logits = feats @ weights.T + bias
        logits -= logits.max(axis=1, keepdims=True)
        expv = np.exp(logits)
        probs = expv / expv.sum(axis=1, keepdims=True)
        gl = (probs - onehot) / len(labels)
        gw = gl.T @ feats
        gb = gl.sum(axis=0)
        for g, mm, vv, param in ((gw, m_w, v_w, weights), (gb, m_b, v_b, bias)):
            mm *= b1; mm += (1 - b1) * g
            vv *= b2; vv += (1 - b2) * g * g
            param -= lr * (mm / (1 - b1**t)) / (np.sqrt(vv / (1 - b2**t)) + eps)

    params = ToyClassifierParams(weights, bias, h, w)
    preds = np.argmax(feats @ weights.T + bias, axis=1)
    acc = float(np.mean(preds == labels))
    if acc < min_accuracy:
        raise RuntimeError(
            f"toy classifier failed to converge: train accuracy {acc:.3f} < {min_accuracy}")
    return params


def accuracy(params: ToyClassifierParams, corpus) -> float:
    hits = sum(1 for img, lab in corpus if classify(params, img) == int(lab))
    return hits / len(corpus)


def _class_templates(grid: int) -> list[np.ndarray]:
    """Four orthogonal, zero-mean +-1 patterns over the block grid."""
    by = np.arange(grid).reshape(-1, 1)
    bx = np.arange(grid).reshape(1, -1)
    ones = np.ones((grid, grid))
    return [
        np.where(by % 2 == 0, 1.0, -1.0) * ones,  # row stripes, period 2
        np.where(bx % 2 == 0, 1.0, -1.0) * ones,  # column stripes, period 2
        np.where((by + bx) % 2 == 0, 1.0, -1.0),  # checkerboard
        np.where(by % 4 < 2, 1.0, -1.0) * ones,  # row stripes, period 4
    ]


def make_texture_corpus(n: int, size: int = 64, seed: int = 0) -> list[tuple[np.ndarray, int]]:
    """Procedural 4-class labeled corpus keyed to block-grid frequencies.

    Each image is a +-A modulation of the 8x8-block means following its
    class template, plus class-independent per-pixel texture noise and a
    random color tint. The block-mean patterns are linearly separable and
    are erased once the luma DC quantization step exceeds ~2x their
    amplitude.
    """
    if size % 16:
        raise ValueError("corpus size must be a multiple of 16")
    rng = np.random.default_rng(seed)
    templates = _class_templates(size // 8)
    corpus = []
    for i in range(n):
        cls = int(rng.integers(0, 4))
        # 8*amp stays below half the luma DC step at q=5 (160/2), so heavy
        # compression provably erases the class signal.
        amp = rng.uniform(4.0, 9.0)
        field = 128.0 + amp * templates[cls]
        img = np.kron(field, np.ones((8, 8)))
        img = img + rng.uniform(4.0, 9.0) * rng.standard_normal((size, size))
        tint = rng.uniform(-18.0, 18.0, size=3)
        rgb = np.clip(img[:, :, None] + tint, 0, 255).astype(np.uint8)
        corpus.append((rgb, cls))
    return corpus


def save_classifier(params: ToyClassifierParams, path: str | Path):
    payload = {
        "format": CLASSIFIER_CKPT_FORMAT,
        "weights": params.weights.tolist(),
        "bias": params.bias.tolist(),
        "input_height": params.input_height,
        "input_width": params.input_width,
    }
    Path(path).write_text(json.dumps(payload))


def load_classifier(path: str | Path) -> ToyClassifierParams:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CLASSIFIER_CKPT_FORMAT:
        raise ValueError(f"unrecognized classifier checkpoint format: {payload.get('format')!r}")
    return ToyClassifierParams(
        np.array(payload["weights"], dtype=np.float64),
        np.array(payload["bias"], dtype=np.float64),
        int(payload["input_height"]),
        int(payload["input_width"]),
    )
