"""Block-matching collaborative denoising (hard-threshold stage) and noise
level estimation.

For each reference block on a stride-3 grid, similar blocks from a local
search window are stacked, transformed (2D orthonormal DCT per block plus a
1D orthonormal Walsh-Hadamard along the stack), hard-thresholded, inverted,
and aggregated with weights inversely proportional to the number of
retained coefficients. RGB images are processed in a luminance/opponent
decomposition with per-plane noise scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import check_image

# Orthogonal-ish opponent color transform: luminance plus two chroma planes.
_OPP = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.5, 0.0, -0.5],
        [0.25, -0.5, 0.25],
    ],
    dtype=np.float64,
)
_OPP_INV = np.linalg.inv(_OPP)
# iid RGB noise of std sigma becomes sigma * row-norm in each opponent plane
_OPP_GAIN = np.sqrt((_OPP**2).sum(axis=1))


@dataclass(frozen=True)
class DenoiseConfig:
    sigma: float = 0.0
    block: int = 8
    search_window: int = 21
    max_matches: int = 16
    hard_threshold: float = 2.7

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.block > self.search_window:
            raise ValueError(
                f"block ({self.block}) must not exceed search window ({self.search_window})"
            )
        if self.max_matches < 1:
            raise ValueError(f"max_matches must be >= 1, got {self.max_matches}")


@lru_cache(maxsize=8)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix of size n."""
    k = np.arange(n, dtype=np.float64)[:, None]
    x = np.arange(n, dtype=np.float64)[None, :]
    mat = np.cos(np.pi * (2.0 * x + 1.0) * k / (2.0 * n))
    mat *= np.sqrt(2.0 / n)
    mat[0] /= math.sqrt(2.0)
    return mat


@lru_cache(maxsize=8)
def _hadamard(n: int) -> np.ndarray:
    """Orthonormal Walsh-Hadamard matrix; n must be a power of two."""
    h = np.ones((1, 1), dtype=np.float64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]]) / math.sqrt(2.0)
    if h.shape[0] != n:
        raise ValueError(f"stack depth {n} is not a power of two")
    return h


def _ref_positions(extent: int, block: int, stride: int = 3) -> list[int]:
    last = extent - block
    pos = list(range(0, last + 1, stride))
    if pos[-1] != last:
        pos.append(last)
    return pos


def _denoise_plane(plane: np.ndarray, sigma: float, cfg: DenoiseConfig) -> np.ndarray:
    h, w = plane.shape
    b = cfg.block
    if min(h, w) < b:
        raise ValueError(f"image {h}x{w} is smaller than the {b}x{b} block size")

    views = sliding_window_view(plane, (b, b))  # (h-b+1, w-b+1, b, b)
    nh, nw = views.shape[:2]
    half = (cfg.search_window - b) // 2
    dct = _dct_matrix(b)
    threshold = cfg.hard_threshold * sigma

    num = np.zeros((h, w), dtype=np.float64)
    den = np.zeros((h, w), dtype=np.float64)

    for i in _ref_positions(h, b):
        for j in _ref_positions(w, b):
            i0, i1 = max(0, i - half), min(nh - 1, i + half)
            j0, j1 = max(0, j - half), min(nw - 1, j + half)
            cand = views[i0 : i1 + 1, j0 : j1 + 1]
            dist = ((cand - views[i, j]) ** 2).sum(axis=(-1, -2)).ravel()
            order = np.argsort(dist, kind="stable")
            depth = 1 << int(math.log2(min(cfg.max_matches, order.size)))
            sel = order[:depth]
            rows = i0 + sel // (j1 - j0 + 1)
            cols = j0 + sel % (j1 - j0 + 1)

            group = cand.reshape(-1, b, b)[sel].astype(np.float64)
            coef = np.einsum("pq,nqr,sr->nps", dct, group, dct)
            had = _hadamard(depth)
            coef = np.tensordot(had, coef, axes=(1, 0))
            kept = np.abs(coef) >= threshold
            retained = int(kept.sum())
            coef *= kept
            est = np.tensordot(had.T, coef, axes=(1, 0))
            est = np.einsum("qp,nqr,rs->nps", dct, est, dct)

            wgt = 1.0 / max(retained, 1)
            for n in range(depth):
                r, c = rows[n], cols[n]
                num[r : r + b, c : c + b] += wgt * est[n]
                den[r : r + b, c : c + b] += wgt

    return num / den


def denoise(img: np.ndarray, cfg: DenoiseConfig) -> np.ndarray:
    """Denoise a 1- or 3-channel image; cfg.sigma == 0 is the identity."""
    arr = check_image(img)
    if cfg.sigma == 0:
        return arr
    if arr.shape[0] == 1:
        out = _denoise_plane(arr[0].astype(np.float64), cfg.sigma, cfg)[None]
    else:
        planes = np.tensordot(_OPP, arr.astype(np.float64), axes=(1, 0))
        cleaned = [
            _denoise_plane(planes[k], cfg.sigma * _OPP_GAIN[k], cfg) for k in range(3)
        ]
        out = np.tensordot(_OPP_INV, np.stack(cleaned), axes=(1, 0))
    return np.clip(out, 0.0, 1.0).astype(arr.dtype)


def estimate_sigma(img: np.ndarray) -> float:
    """Noise std estimate from the median absolute 2x2 Haar diagonal response.

    For a constant image this is exactly 0. Requires at least 16x16 pixels.
    """
    arr = check_image(img).astype(np.float64)
    _, h, w = arr.shape
    if min(h, w) < 16:
        raise ValueError(f"image {h}x{w} is too small for noise estimation (need 16x16)")
    h2, w2 = h - h % 2, w - w % 2
    x = arr[:, :h2, :w2]
    d = (x[:, 0::2, 0::2] - x[:, 0::2, 1::2] - x[:, 1::2, 0::2] + x[:, 1::2, 1::2]) / 2.0
    return float(np.median(np.abs(d)) / 0.6745)


def parse_denoise_setting(text: str) -> str:
    """Validate a denoise CLI setting: off, auto, or sigma=<value>."""
    s = text.strip()
    if s in ("off", "auto"):
        return s
    if s.startswith("sigma="):
        value = float(s[len("sigma=") :])
        if value < 0:
            raise ValueError(f"denoise sigma must be >= 0, got {value}")
        return f"sigma={value:g}"
    raise ValueError(f"bad denoise setting {text!r} (expected off, auto, or sigma=<v>)")


def apply_denoise(img: np.ndarray, setting: str, cfg: DenoiseConfig | None = None) -> np.ndarray:
    """Apply a denoise setting string to an image.

    "off" returns the input; "auto" estimates sigma from the image itself;
    "sigma=<v>" uses the given noise level. Block-matching parameters come
    from cfg when provided.
    """
    setting = parse_denoise_setting(setting)
    if setting == "off":
        return check_image(img)
    base = cfg if cfg is not None else DenoiseConfig()
    if setting == "auto":
        sigma = estimate_sigma(img)
    else:
        sigma = float(setting[len("sigma=") :])
    run = DenoiseConfig(
        sigma=sigma,
        block=base.block,
        search_window=base.search_window,
        max_matches=base.max_matches,
        hard_threshold=base.hard_threshold,
    )
    return denoise(img, run)
