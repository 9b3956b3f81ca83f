"""Micro super-resolution backbone: a small residual conv net with a
pixel-shuffle upsampler and a global bicubic skip.

With all parameters at zero the network branch vanishes and the output is
exactly the bicubic upsample of the input, so any gain over bicubic is
learned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import add, conv2d, pixel_shuffle, relu, upsample2d
from .tensor import Tensor, as_tensor, counters


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 3
    features: int = 32
    blocks: int = 3
    scale: int = 2

    def __post_init__(self):
        if self.scale not in (2, 3, 4):
            raise ValueError(f"scale must be 2, 3 or 4, got {self.scale}")
        if self.features < 1:
            raise ValueError(f"features must be >= 1, got {self.features}")
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if self.blocks < 1:
            raise ValueError(f"blocks must be >= 1, got {self.blocks}")


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Deterministic (name, shape) order of all parameters."""
    c, f, s = cfg.in_channels, cfg.features, cfg.scale
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("head.weight", (f, c, 3, 3)),
        ("head.bias", (f,)),
    ]
    for i in range(cfg.blocks):
        shapes += [
            (f"block{i}.conv1.weight", (f, f, 3, 3)),
            (f"block{i}.conv1.bias", (f,)),
            (f"block{i}.conv2.weight", (f, f, 3, 3)),
            (f"block{i}.conv2.bias", (f,)),
        ]
    shapes += [
        ("up.weight", (c * s * s, f, 3, 3)),
        ("up.bias", (c * s * s,)),
        ("tail.weight", (c, c, 3, 3)),
        ("tail.bias", (c,)),
    ]
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """He-normal (fan-in) conv weights, zero biases; deterministic per seed.

    The tail conv starts at zero so the untrained network reproduces its
    bicubic skip exactly; everything it ever gains over bicubic is learned.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg):
        if name.endswith(".bias") or name == "tail.weight":
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            params[name] = (rng.standard_normal(shape) * std).astype(np.float32)
    return params


def param_count(params: dict[str, np.ndarray]) -> int:
    return int(sum(p.size for p in params.values()))


def model_forward(cfg: ModelConfig, params: dict, x) -> Tensor:
    """Run the backbone on an NCHW input (Tensor or ndarray).

    head conv -> residual blocks (conv-relu-conv + skip) -> body skip ->
    conv to C*s^2 channels -> pixel shuffle -> tail conv, plus a bicubic
    upsample of the input added to the output.
    """
    x = as_tensor(x)
    if x.data.ndim != 4 or x.data.shape[1] != cfg.in_channels:
        raise ValueError(
            f"expected NCHW input with {cfg.in_channels} channels, got {x.data.shape}"
        )
    if min(x.data.shape[2], x.data.shape[3]) < 8:
        raise ValueError(f"input spatial dims must be >= 8, got {x.data.shape[2:]}")
    expected = {name: shape for name, shape in param_shapes(cfg)}
    if set(expected) != set(params):
        raise ValueError("parameter names do not match the model config")
    p = {name: as_tensor(params[name]) for name in expected}
    for name, shape in expected.items():
        if tuple(p[name].data.shape) != shape:
            raise ValueError(f"parameter {name} has shape {p[name].data.shape}, expected {shape}")
    counters["forward"] += 1

    head = conv2d(x, p["head.weight"], p["head.bias"])
    feat = head
    for i in range(cfg.blocks):
        t = conv2d(feat, p[f"block{i}.conv1.weight"], p[f"block{i}.conv1.bias"])
        t = relu(t)
        t = conv2d(t, p[f"block{i}.conv2.weight"], p[f"block{i}.conv2.bias"])
        feat = add(feat, t)
    feat = add(feat, head)
    up = conv2d(feat, p["up.weight"], p["up.bias"])
    up = pixel_shuffle(up, cfg.scale)
    out = conv2d(up, p["tail.weight"], p["tail.bias"])
    return add(out, upsample2d(x, cfg.scale))
