"""Shared test fixtures: synthetic image generators and a mini-trained estimator."""

from __future__ import annotations

import numpy as np
import pytest

from jpegtune import entropy, optimizer


def natural_image(rng: np.random.Generator, size: int = 64, width: int | None = None) -> np.ndarray:
    """Smooth blobs + oriented texture + mild noise: a natural-ish test image."""
    h, w = size, width or size
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.full((h, w, 3), 128.0)
    for _ in range(int(rng.integers(2, 6))):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        sx, sy = rng.uniform(0.1 * w, 0.5 * w), rng.uniform(0.1 * h, 0.5 * h)
        amp = rng.uniform(-70, 70, 3)
        blob = np.exp(-(((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2))
        img += blob[:, :, None] * amp
    f1, f2 = rng.uniform(0.05, 0.55, 2)
    ph1, ph2 = rng.uniform(0, 2 * np.pi, 2)
    tex = np.sin(f1 * xx + ph1) * np.cos(f2 * yy + ph2)
    img += tex[:, :, None] * rng.uniform(2, 14, 3)
    img += rng.standard_normal((h, w, 3)) * rng.uniform(0.5, 4.0)
    return np.clip(img, 0, 255).astype(np.uint8)


def natural_corpus(seed: int, n: int, size: int = 64) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [natural_image(rng, size) for _ in range(n)]


def rel_err(a, b, floor=1e-6):
    a, b = float(a), float(b)
    return abs(a - b) / max(abs(a), abs(b), floor)


def grad_close(fd, ana, rtol=1e-3, atol=1e-6) -> bool:
    """Relative agreement with an absolute floor: |a-b| < max(rtol*|ref|, atol)."""
    fd, ana = float(fd), float(ana)
    return abs(fd - ana) < max(rtol * max(abs(fd), abs(ana)), atol)


@pytest.fixture(scope="session")
def mini_trained():
    """A small universal run shared by property tests that need trained
    artifacts (entropy sanity bounds, estimator behavior)."""
    corpus = natural_corpus(seed=101, n=40, size=64)
    cfg = optimizer.TrainConfig(steps=1200, batch_size=4, lr=1e-2, seed=11)
    weights = optimizer.LossWeights(c_r=1.0, c_d=1.0, c_c=0.0)
    tables, eset, trace = optimizer.universal_train(corpus, cfg, weights)
    return {"tables": tables, "eset": eset, "trace": trace, "corpus": corpus}
