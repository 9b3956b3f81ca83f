"""Checkpoint container and its file format.

Layout: a text header (format line, model config, training step, optimizer
flag, ordered tensor names with shapes) terminated by a line reading
``data``, followed by a raw little-endian float32 payload holding every
parameter in header order and, when optimizer state is present, the first
and second Adam moments in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelConfig, param_shapes

_MAGIC = "simusr-ckpt 1"


@dataclass
class Checkpoint:
    cfg: ModelConfig
    params: dict[str, np.ndarray]
    step: int = 0
    moments: dict[str, tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        expected = param_shapes(self.cfg)
        if [n for n, _ in expected] != list(self.params):
            raise ValueError("checkpoint parameters do not match the model config")
        for name, shape in expected:
            if tuple(self.params[name].shape) != shape:
                raise ValueError(f"parameter {name}: shape {self.params[name].shape} != {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"parameter {name} contains non-finite values")

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    cfg = ckpt.cfg
    lines = [
        _MAGIC,
        f"in_channels {cfg.in_channels}",
        f"features {cfg.features}",
        f"blocks {cfg.blocks}",
        f"scale {cfg.scale}",
        f"step {ckpt.step}",
        f"adam {int(ckpt.moments is not None)}",
    ]
    names = list(ckpt.params)
    for name in names:
        dims = " ".join(str(d) for d in ckpt.params[name].shape)
        lines.append(f"tensor {name} {dims}")
    lines.append("data")
    header = ("\n".join(lines) + "\n").encode("ascii")

    chunks = [ckpt.params[name].astype("<f4").tobytes(order="C") for name in names]
    if ckpt.moments is not None:
        chunks += [ckpt.moments[name][0].astype("<f4").tobytes(order="C") for name in names]
        chunks += [ckpt.moments[name][1].astype("<f4").tobytes(order="C") for name in names]
    Path(path).write_bytes(header + b"".join(chunks))


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    marker = b"\ndata\n"
    cut = blob.find(marker)
    if cut < 0 or not blob.startswith(_MAGIC.encode("ascii")):
        raise ValueError(f"{path}: not a checkpoint file")
    header = blob[:cut].decode("ascii").splitlines()
    payload = blob[cut + len(marker) :]

    fields: dict[str, str] = {}
    tensors: list[tuple[str, tuple[int, ...]]] = []
    for line in header[1:]:
        key, _, rest = line.partition(" ")
        if key == "tensor":
            name, *dims = rest.split()
            tensors.append((name, tuple(int(d) for d in dims)))
        else:
            fields[key] = rest
    cfg = ModelConfig(
        in_channels=int(fields["in_channels"]),
        features=int(fields["features"]),
        blocks=int(fields["blocks"]),
        scale=int(fields["scale"]),
    )
    step = int(fields["step"])
    has_adam = bool(int(fields["adam"]))

    sizes = [int(np.prod(shape)) for _, shape in tensors]
    total = sum(sizes) * (3 if has_adam else 1) * 4
    if len(payload) != total:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {total}")

    flat = np.frombuffer(payload, dtype="<f4")
    pos = 0

    def take(shape) -> np.ndarray:
        nonlocal pos
        n = int(np.prod(shape))
        out = flat[pos : pos + n].reshape(shape).astype(np.float32)
        pos += n
        return out

    params = {name: take(shape) for name, shape in tensors}
    moments = None
    if has_adam:
        first = {name: take(shape) for name, shape in tensors}
        second = {name: take(shape) for name, shape in tensors}
        moments = {name: (first[name], second[name]) for name, _ in tensors}
    return Checkpoint(cfg=cfg, params=params, step=step, moments=moments)
