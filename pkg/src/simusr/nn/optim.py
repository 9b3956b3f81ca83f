"""Bias-corrected Adam updates over named parameter dicts."""

from __future__ import annotations

import numpy as np


def init_moments(params: dict[str, np.ndarray]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {name: (np.zeros_like(p), np.zeros_like(p)) for name, p in params.items()}


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    moments: dict[str, tuple[np.ndarray, np.ndarray]],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int = 1,
):
    """One Adam update, in place; returns (params, moments).

    t is the 1-based step count used for bias correction. A non-finite
    gradient aborts the step before any parameter is touched.
    """
    if t < 1:
        raise ValueError(f"step count must be >= 1, got {t}")
    for name in params:
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name}")
        if not np.all(np.isfinite(grads[name])):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m, v = moments[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, moments
