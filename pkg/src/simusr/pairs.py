"""Pseudo-pair construction from low-resolution images, patch sampling, and
the mixture-of-augmentations used during training.

A pseudo-pair treats an available LR image as the target (the "father") and
its downscaled version as the input (the "son"). Built pair sets can be
stored as a directory of PNGs plus a text manifest, and every stored son is
re-derivable bit exactly from its stored father under the recorded spec.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .denoise import DenoiseConfig, apply_denoise, parse_denoise_setting
from .image import check_image, load_image, quantize, quantize_u8, save_image
from .resample import Kernel, bicubic_upsample, parse_kernel, resample

MANIFEST_NAME = "manifest"
_MANIFEST_MAGIC = "simusr-pairs 1"


@dataclass
class PseudoPair:
    father: np.ndarray  # (C, sH, sW) pseudo-HR target
    son: np.ndarray  # (C, H, W) pseudo-LR input
    source_id: str

    def scale(self) -> int:
        """Integer scale factor implied by the father/son shapes."""
        _, fh, fw = self.father.shape
        _, sh, sw = self.son.shape
        s = fh // sh
        if s < 1 or sh * s != fh or sw * s != fw:
            raise ValueError(
                f"pair {self.source_id}: father {fh}x{fw} is not an integer "
                f"multiple of son {sh}x{sw}"
            )
        return s


@dataclass(frozen=True)
class PairSetSpec:
    count: int
    scale: int = 2
    kernel: Kernel = Kernel("keys", a=-0.5)
    antialias: bool = True
    denoise: str = "off"  # off | auto | sigma=<v>
    son_from_noisy: bool = False  # derive sons from the raw (pre-denoise) input
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"pair count must be >= 1, got {self.count}")
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        parse_denoise_setting(self.denoise)


def substream(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-worker RNG stream derived from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def build_pairs(
    spec: PairSetSpec,
    inputs: list[np.ndarray],
    names: list[str] | None = None,
    denoise_cfg: DenoiseConfig | None = None,
    workers: int = 1,
) -> list[PseudoPair]:
    """Build one pseudo-pair per input image, ordered by source id.

    Fathers are denoised (per spec.denoise) and snapped to the 8-bit grid so
    the in-memory pair set is identical to a stored-and-reloaded one; sons
    are exactly ``resample(father, scale, kernel, down, antialias)``. With
    spec.son_from_noisy the son is derived from the raw input instead, so
    the pair also teaches noise removal.
    """
    if not inputs:
        raise ValueError("no input images given")
    if len(inputs) != spec.count:
        raise ValueError(f"spec says {spec.count} images, got {len(inputs)}")
    if names is not None and len(names) != len(inputs):
        raise ValueError("names and inputs must have equal length")
    ids = names if names is not None else [f"{i:04d}" for i in range(len(inputs))]

    def build_one(k: int) -> PseudoPair:
        img = check_image(inputs[k], name=f"input {ids[k]}")
        min_dim = min(img.shape[1], img.shape[2])
        if min_dim < spec.scale:
            raise ValueError(
                f"input {ids[k]} is too small ({img.shape[1]}x{img.shape[2]}) "
                f"for scale {spec.scale}"
            )
        father = quantize(apply_denoise(img, spec.denoise, denoise_cfg))
        base = quantize(img) if spec.son_from_noisy else father
        son = resample(base, spec.scale, spec.kernel, "down", spec.antialias)
        # keep father aligned with the (possibly cropped) son extent
        _, sh, sw = son.shape
        father = father[:, : sh * spec.scale, : sw * spec.scale]
        return PseudoPair(father=father, son=son, source_id=ids[k])

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(build_one, range(len(inputs))))
    else:
        pairs = [build_one(k) for k in range(len(inputs))]
    return pairs


def sample_patch(
    pair: PseudoPair, lr_patch: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (son, father) patch pair; father offsets are scale x son offsets."""
    s = pair.scale()
    _, sh, sw = pair.son.shape
    if lr_patch > min(sh, sw):
        raise ValueError(f"patch {lr_patch} exceeds son size {sh}x{sw}")
    y = int(rng.integers(0, sh - lr_patch + 1))
    x = int(rng.integers(0, sw - lr_patch + 1))
    son = pair.son[:, y : y + lr_patch, x : x + lr_patch].copy()
    father = pair.father[
        :, s * y : s * (y + lr_patch), s * x : s * (x + lr_patch)
    ].copy()
    return son, father


@dataclass(frozen=True)
class AugmentPolicy:
    """Geometric flips/rotations plus a per-patch mixture of photometric ops.

    When enabled, at most one photometric op is drawn per patch from
    {blend, cutblur, cutout, rgb_permute, mixup} with the given mixture
    weights. Affine warps are deliberately absent.
    """

    enabled: bool = True
    hflip: float = 0.5
    vflip: float = 0.5
    rot90: float = 0.5
    photometric: float = 1.0  # probability that any photometric op is applied
    blend: float = 1.0  # mixture weights
    cutblur: float = 1.0
    cutout: float = 1.0
    rgb_permute: float = 1.0
    mixup: float = 1.0
    blend_alpha: float = 0.6  # strengths
    cutblur_frac: float = 0.5
    cutout_frac: float = 0.25
    mixup_beta: float = 1.2

    @staticmethod
    def off() -> "AugmentPolicy":
        return AugmentPolicy(enabled=False)

    @staticmethod
    def geometric() -> "AugmentPolicy":
        return AugmentPolicy(photometric=0.0)

    @staticmethod
    def moa() -> "AugmentPolicy":
        return AugmentPolicy()

    @staticmethod
    def named(name: str) -> "AugmentPolicy":
        try:
            return {
                "off": AugmentPolicy.off,
                "geo": AugmentPolicy.geometric,
                "moa": AugmentPolicy.moa,
            }[name]()
        except KeyError:
            raise ValueError(f"unknown augment policy {name!r} (off, geo, moa)") from None


def blend_patch(son, father, color, alpha):
    """Mix both patches toward a constant color with the same alpha."""
    c = np.asarray(color, dtype=son.dtype).reshape(-1, 1, 1)
    return (1 - alpha) * son + alpha * c, (1 - alpha) * father + alpha * c


def cutblur_patch(son, father, rect, swap: bool):
    """Paste the upsampled-son region into the father (or the reverse).

    rect is (y, x, h, w) in son coordinates; the father-side rectangle is the
    same region scaled by the pair's integer scale factor.
    """
    s = father.shape[1] // son.shape[1]
    if son.shape[1] * s != father.shape[1] or son.shape[2] * s != father.shape[2]:
        raise ValueError("cutblur needs an integer scale between son and father")
    y, x, h, w = rect
    up = bicubic_upsample(son, s)
    fy, fx, fh, fw = s * y, s * x, s * h, s * w
    out = up.copy() if swap else father.copy()
    src = father if swap else up
    out[:, fy : fy + fh, fx : fx + fw] = src[:, fy : fy + fh, fx : fx + fw]
    return son, out


def cutout_patch(son, father, rect):
    """Zero a rectangular son region; the father is untouched."""
    y, x, h, w = rect
    out = son.copy()
    out[:, y : y + h, x : x + w] = 0.0
    return out, father


def rgb_permute_patch(son, father, perm):
    """Apply one channel permutation to both patches."""
    p = np.asarray(perm)
    return son[p].copy(), father[p].copy()


def mixup_patch(son_a, father_a, son_b, father_b, lam: float):
    """Blend two pairs with a shared coefficient; lam=1 returns the first."""
    lam = float(lam)
    son = lam * son_a + (1.0 - lam) * son_b
    father = lam * father_a + (1.0 - lam) * father_b
    return son.astype(son_a.dtype), father.astype(father_a.dtype)


def _rand_rect(rng, h, w, frac):
    rh = max(1, int(round(h * frac)))
    rw = max(1, int(round(w * frac)))
    y = int(rng.integers(0, h - rh + 1))
    x = int(rng.integers(0, w - rw + 1))
    return y, x, rh, rw


def augment(
    son: np.ndarray,
    father: np.ndarray,
    policy: AugmentPolicy,
    rng: np.random.Generator,
    other: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Augment an aligned patch pair.

    Geometric ops are applied identically to both patches. At most one
    photometric op follows, drawn from the policy's mixture; mixup needs a
    second pair in `other` and is excluded from the draw when absent, as is
    rgb_permute for single-channel patches.
    """
    if not policy.enabled:
        return son, father
    if rng.random() < policy.hflip:
        son, father = son[:, :, ::-1].copy(), father[:, :, ::-1].copy()
    if rng.random() < policy.vflip:
        son, father = son[:, ::-1, :].copy(), father[:, ::-1, :].copy()
    if rng.random() < policy.rot90:
        k = int(rng.integers(1, 4))
        son = np.rot90(son, k, axes=(1, 2)).copy()
        father = np.rot90(father, k, axes=(1, 2)).copy()

    ops = ["blend", "cutblur", "cutout", "rgb_permute", "mixup"]
    weights = np.array(
        [
            policy.blend,
            policy.cutblur,
            policy.cutout,
            policy.rgb_permute if son.shape[0] == 3 else 0.0,
            policy.mixup if other is not None else 0.0,
        ],
        dtype=np.float64,
    )
    total = weights.sum()
    if total <= 0 or not rng.random() < policy.photometric:
        return son, father

    chosen = ops[int(rng.choice(len(ops), p=weights / total))]
    _, sh, sw = son.shape
    if chosen == "blend":
        color = rng.random(son.shape[0])
        alpha = float(rng.uniform(0.0, policy.blend_alpha))
        return blend_patch(son, father, color, alpha)
    if chosen == "cutblur":
        rect = _rand_rect(rng, sh, sw, policy.cutblur_frac)
        return cutblur_patch(son, father, rect, swap=bool(rng.integers(0, 2)))
    if chosen == "cutout":
        return cutout_patch(son, father, _rand_rect(rng, sh, sw, policy.cutout_frac))
    if chosen == "rgb_permute":
        return rgb_permute_patch(son, father, rng.permutation(son.shape[0]))
    lam = float(rng.beta(policy.mixup_beta, policy.mixup_beta))
    return mixup_patch(son, father, other[0], other[1], lam)


# -- pair-set directory ------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_pairs(dirpath, pairs: list[PseudoPair], spec: PairSetSpec) -> Path:
    """Write a pair set as PNGs plus a text manifest; returns the manifest path."""
    out = Path(dirpath)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        _MANIFEST_MAGIC,
        f"count {len(pairs)}",
        f"scale {spec.scale}",
        f"kernel {spec.kernel.spec()}",
        f"antialias {int(spec.antialias)}",
        f"denoise {spec.denoise}",
        f"son_from_noisy {int(spec.son_from_noisy)}",
        f"seed {spec.seed}",
    ]
    for pair in pairs:
        father_name = f"{pair.source_id}_father.png"
        son_name = f"{pair.source_id}_son.png"
        save_image(pair.father, out / father_name)
        save_image(pair.son, out / son_name)
        lines.append(
            f"pair {pair.source_id} {father_name} {son_name} "
            f"{_sha256(out / father_name)} {_sha256(out / son_name)}"
        )
    manifest = out / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="ascii")
    return manifest


def load_pairs(dirpath) -> tuple[list[PseudoPair], PairSetSpec]:
    """Load a stored pair set (sons and fathers as quantized float images)."""
    root = Path(dirpath)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise FileNotFoundError(f"no pair manifest at {manifest}")
    lines = manifest.read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != _MANIFEST_MAGIC:
        raise ValueError(f"{manifest}: not a pair-set manifest")
    fields: dict[str, str] = {}
    entries = []
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "pair":
            entries.append(rest.split())
        else:
            fields[key] = rest
    spec = PairSetSpec(
        count=int(fields["count"]),
        scale=int(fields["scale"]),
        kernel=parse_kernel(fields["kernel"]),
        antialias=bool(int(fields["antialias"])),
        denoise=fields["denoise"],
        son_from_noisy=bool(int(fields["son_from_noisy"])),
        seed=int(fields["seed"]),
    )
    if len(entries) != spec.count:
        raise ValueError(f"{manifest}: expected {spec.count} pairs, found {len(entries)}")
    pairs = []
    for source_id, father_name, son_name, father_sha, son_sha in entries:
        father_path, son_path = root / father_name, root / son_name
        for path, sha in ((father_path, father_sha), (son_path, son_sha)):
            if _sha256(path) != sha:
                raise ValueError(f"{path}: content hash mismatch against manifest")
        pairs.append(
            PseudoPair(
                father=load_image(father_path),
                son=load_image(son_path),
                source_id=source_id,
            )
        )
    return pairs, spec


def verify_pairs(dirpath) -> None:
    """Check that every stored son re-derives bit exactly from its father.

    Re-derivation applies the manifest's downsampling settings to the stored
    father and quantizes the result exactly as the save path does. Raises
    ValueError on the first mismatching pair.
    """
    pairs, spec = load_pairs(dirpath)
    if spec.son_from_noisy:
        raise ValueError(
            "pair set was built with sons derived from the raw inputs; "
            "sons cannot be re-derived from the stored fathers"
        )
    for pair in pairs:
        redone = resample(pair.father, spec.scale, spec.kernel, "down", spec.antialias)
        if not np.array_equal(quantize_u8(redone), quantize_u8(pair.son)):
            raise ValueError(f"pair {pair.source_id}: stored son does not re-derive")
