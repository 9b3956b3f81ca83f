"""Offline training on pseudo-pairs, online single-image training, and
plain inference.

All three flows share one deterministic loop: sample aligned patches,
augment, forward, L1 loss, backward, Adam. Runs with the same seed and
data produce bit-identical checkpoints and outputs.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .denoise import apply_denoise, parse_denoise_setting
from .image import check_image
from .pairs import AugmentPolicy, PseudoPair, build_pairs, PairSetSpec, sample_patch, augment, substream
from .resample import BICUBIC, Kernel


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch: int = 8
    lr_patch: int = 16
    lr: float = 1e-3
    seed: int = 0
    scale: int = 2
    augment: AugmentPolicy = field(default_factory=AugmentPolicy.moa)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch < 1 or self.lr_patch < 1:
            raise ValueError("batch and lr_patch must be >= 1")


@dataclass(frozen=True)
class ZssrConfig:
    steps: int = 1000
    lr: float = 1e-3
    lr_patch: int = 48  # sized for realistic test images (sons of 96px and up)
    seed: int = 0
    denoise: str = "off"
    kernel: Kernel = BICUBIC

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        parse_denoise_setting(self.denoise)


#: One training-log row: (step, loss, elapsed_ms since the loop started).
LogRow = tuple[int, float, float]


@dataclass
class ZssrResult:
    sr: np.ndarray
    log: list[LogRow]
    elapsed_ms: float


def write_log_csv(path, log: list[LogRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "elapsed_ms"])
        for step, loss, elapsed in log:
            writer.writerow([step, f"{loss:.8f}", f"{elapsed:.3f}"])


def _simusr_lr(base: float, step: int, total: int) -> float:
    # halve at 40% and 80% of the step budget
    span = max(1, round(0.4 * total))
    return base * 0.5 ** min(2, (step - 1) // span)


def _train_loop(
    pairs: list[PseudoPair],
    policy: AugmentPolicy,
    steps: int,
    batch: int,
    lr_patch: int,
    lr_for_step,
    seed: int,
    cfg: nn.ModelConfig,
) -> tuple[nn.Checkpoint, list[LogRow]]:
    rng = substream(seed, 0)
    params = nn.init_params(cfg, seed)
    moments = nn.init_moments(params)
    log: list[LogRow] = []
    start = time.perf_counter()
    want_second = policy.enabled and policy.photometric > 0 and policy.mixup > 0

    for step in range(1, steps + 1):
        sons, fathers, used = [], [], []
        for _ in range(batch):
            k = int(rng.integers(0, len(pairs)))
            son, father = sample_patch(pairs[k], lr_patch, rng)
            other = None
            if want_second:
                j = int(rng.integers(0, len(pairs)))
                other = sample_patch(pairs[j], lr_patch, rng)
            son, father = augment(son, father, policy, rng, other=other)
            sons.append(son)
            fathers.append(father)
            used.append(pairs[k].source_id)
        x = nn.Tensor(np.stack(sons))
        y = nn.Tensor(np.stack(fathers))
        tensors = {n: nn.Tensor(p, requires_grad=True) for n, p in params.items()}
        loss = nn.l1_loss(nn.model_forward(cfg, tensors, x), y)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(
                f"non-finite loss at step {step} (batch drew pairs {sorted(set(used))})"
            )
        loss.backward()
        grads = {n: t.grad for n, t in tensors.items()}
        nn.adam_step(params, grads, moments, lr=lr_for_step(step), t=step)
        log.append((step, value, (time.perf_counter() - start) * 1e3))

    ckpt = nn.Checkpoint(cfg=cfg, params=params, step=steps, moments=moments)
    return ckpt, log


def model_config_for(pairs: list[PseudoPair], scale: int, features: int = 32, blocks: int = 3) -> nn.ModelConfig:
    channels = pairs[0].father.shape[0]
    return nn.ModelConfig(in_channels=channels, features=features, blocks=blocks, scale=scale)


def train_simusr(
    pairs: list[PseudoPair],
    cfg: TrainConfig,
    model_cfg: nn.ModelConfig | None = None,
) -> tuple[nn.Checkpoint, list[LogRow]]:
    """Offline training over a pseudo-pair set; returns (checkpoint, log)."""
    if not pairs:
        raise ValueError("no pseudo-pairs to train on")
    for pair in pairs:
        if pair.scale() != cfg.scale:
            raise ValueError(
                f"pair {pair.source_id} has scale {pair.scale()}, config says {cfg.scale}"
            )
        if min(pair.son.shape[1], pair.son.shape[2]) < cfg.lr_patch:
            raise ValueError(
                f"pair {pair.source_id}: son {pair.son.shape[1]}x{pair.son.shape[2]} "
                f"is smaller than lr_patch {cfg.lr_patch}"
            )
    if model_cfg is None:
        model_cfg = model_config_for(pairs, cfg.scale)
    if model_cfg.scale != cfg.scale:
        raise ValueError(f"model scale {model_cfg.scale} != training scale {cfg.scale}")
    return _train_loop(
        pairs,
        cfg.augment,
        cfg.steps,
        cfg.batch,
        cfg.lr_patch,
        lambda step: _simusr_lr(cfg.lr, step, cfg.steps),
        cfg.seed,
        model_cfg,
    )


def train_zssr(
    lr_image: np.ndarray,
    cfg: ZssrConfig,
    model_cfg: nn.ModelConfig | None = None,
    scale: int = 2,
) -> ZssrResult:
    """Train a fresh model on the test image's own pseudo-pair, then run it.

    Geometric flips/rotations only; the learning rate halves whenever the
    mean loss over the last 200 steps fails to improve on the previous 200
    by at least 1%. The wall time covers training plus the final forward.
    """
    start = time.perf_counter()
    img = check_image(lr_image)
    if model_cfg is None:
        model_cfg = nn.ModelConfig(in_channels=img.shape[0], scale=scale)
    father = apply_denoise(img, cfg.denoise)
    spec = PairSetSpec(count=1, scale=model_cfg.scale, kernel=cfg.kernel, denoise="off", seed=cfg.seed)
    pair = build_pairs(spec, [father], names=["self"])[0]
    if min(pair.son.shape[1], pair.son.shape[2]) < cfg.lr_patch:
        raise ValueError(
            f"test image is too small for lr_patch {cfg.lr_patch} at scale {model_cfg.scale}"
        )

    lr_state = {"lr": cfg.lr, "losses": []}

    def lr_for_step(step: int) -> float:
        losses = lr_state["losses"]
        if step >= 401 and (step - 1) % 200 == 0:
            recent = float(np.mean(losses[-200:]))
            previous = float(np.mean(losses[-400:-200]))
            if recent > 0.99 * previous:
                lr_state["lr"] *= 0.5
        return lr_state["lr"]

    rng = substream(cfg.seed, 0)
    params = nn.init_params(model_cfg, cfg.seed)
    moments = nn.init_moments(params)
    log: list[LogRow] = []
    policy = AugmentPolicy.geometric()
    for step in range(1, cfg.steps + 1):
        son, fat = sample_patch(pair, cfg.lr_patch, rng)
        son, fat = augment(son, fat, policy, rng)
        tensors = {n: nn.Tensor(p, requires_grad=True) for n, p in params.items()}
        loss = nn.l1_loss(nn.model_forward(model_cfg, tensors, son[None]), nn.Tensor(fat[None]))
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite loss at step {step} (single-image pair)")
        loss.backward()
        nn.adam_step(params, {n: t.grad for n, t in tensors.items()}, moments, lr=lr_for_step(step), t=step)
        lr_state["losses"].append(value)
        log.append((step, value, (time.perf_counter() - start) * 1e3))

    out = nn.model_forward(model_cfg, params, pair.father[None]).data[0]
    sr = np.clip(out, 0.0, 1.0).astype(np.float32)
    return ZssrResult(sr=sr, log=log, elapsed_ms=(time.perf_counter() - start) * 1e3)


def infer(ckpt: nn.Checkpoint, lr_image: np.ndarray, denoise: str = "off") -> np.ndarray:
    """Run a trained checkpoint on an image: no parameter updates, output in [0, 1]."""
    img = apply_denoise(check_image(lr_image), denoise)
    if img.shape[0] != ckpt.cfg.in_channels:
        raise ValueError(
            f"checkpoint expects {ckpt.cfg.in_channels}-channel input, got {img.shape[0]}"
        )
    out = nn.model_forward(ckpt.cfg, ckpt.params, img[None]).data[0]
    return np.clip(out, 0.0, 1.0).astype(np.float32)
