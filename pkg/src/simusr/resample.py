"""Separable image resampling with Keys cubic, box, and Gaussian kernels.

Coordinate convention: output pixel centers map to source coordinates via
``src = (dst + 0.5) * (in / out) - 0.5`` (half-pixel centers). Borders are
handled by reflecting coordinates about edge pixel centers (reflect without
edge repeat), and the tap weights of every output pixel are renormalized to
sum to exactly 1, so constant images are preserved.

Downscaling by factor s produces floor(in/s) pixels; for integer s, the
leftover rows/columns are cropped from the source extent first so that
father/son pixel grids stay exactly aligned. When antialiasing is on, the
kernel is stretched by s (support and argument) to low-pass before
decimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .image import check_image


@dataclass(frozen=True)
class Kernel:
    """Even, finitely supported resampling kernel."""

    family: str  # "keys" | "box" | "gauss"
    a: float = -0.5  # keys polynomial parameter
    sigma: float = 1.0  # gauss width

    def __post_init__(self):
        if self.family not in ("keys", "box", "gauss"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gauss" and not self.sigma > 0:
            raise ValueError(f"gaussian sigma must be > 0, got {self.sigma}")

    @property
    def support(self) -> float:
        if self.family == "keys":
            return 2.0
        if self.family == "box":
            return 0.5
        return 3.0 * self.sigma

    def weight(self, x):
        """Evaluate the kernel at offsets x (scalar or array)."""
        ax = np.abs(np.asarray(x, dtype=np.float64))
        if self.family == "keys":
            a = self.a
            inner = (a + 2.0) * ax**3 - (a + 3.0) * ax**2 + 1.0
            outer = a * ax**3 - 5.0 * a * ax**2 + 8.0 * a * ax - 4.0 * a
            return np.where(ax <= 1.0, inner, np.where(ax <= 2.0, outer, 0.0))
        if self.family == "box":
            return np.where(ax <= 0.5, 1.0, 0.0)
        w = np.exp(-0.5 * (ax / self.sigma) ** 2)
        return np.where(ax <= self.support, w, 0.0)

    def spec(self) -> str:
        """Kernel as a CLI string: keys:-0.5, box, gauss:1.2."""
        if self.family == "keys":
            return f"keys:{self.a:g}"
        if self.family == "box":
            return "box"
        return f"gauss:{self.sigma:g}"


def keys_cubic(a: float = -0.5) -> Kernel:
    return Kernel("keys", a=a)


def box() -> Kernel:
    return Kernel("box")


def gaussian(sigma: float) -> Kernel:
    return Kernel("gauss", sigma=sigma)


#: The default kernel for son generation and the upsampling baseline.
BICUBIC = keys_cubic(-0.5)


def parse_kernel(text: str) -> Kernel:
    """Parse a kernel CLI string (keys:-0.5, box, gauss:1.2)."""
    name, _, arg = text.strip().partition(":")
    if name == "box":
        if arg:
            raise ValueError("box kernel takes no parameter")
        return box()
    if name == "keys":
        return keys_cubic(float(arg) if arg else -0.5)
    if name == "gauss":
        if not arg:
            raise ValueError("gauss kernel needs a sigma, e.g. gauss:1.2")
        return gaussian(float(arg))
    raise ValueError(f"unknown kernel {text!r} (expected keys:<a>, box, or gauss:<sigma>)")


def kernel_weight(kernel: Kernel, x) -> float:
    """Weight of `kernel` at offset x. Total function; zero outside support."""
    w = kernel.weight(x)
    return float(w) if np.isscalar(x) or np.asarray(x).ndim == 0 else w


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    """Fold indices into [0, n) by reflecting about edge pixel centers."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m >= n, period - m, m)


@lru_cache(maxsize=256)
def _plan(n_in: int, n_out: int, ratio: float, kernel: Kernel, stretch: float):
    """Tap indices and renormalized weights for one axis.

    Returns (idx, w): int arrays of shape (n_out, taps) into [0, n_in) and
    float64 weights with each row summing to 1.
    """
    centers = (np.arange(n_out, dtype=np.float64) + 0.5) * ratio - 0.5
    radius = kernel.support * stretch
    taps = int(math.floor(2.0 * radius)) + 1
    first = np.ceil(centers - radius).astype(np.int64)
    idx = first[:, None] + np.arange(taps, dtype=np.int64)[None, :]
    w = kernel.weight((idx - centers[:, None]) / stretch)
    sums = w.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("kernel support does not cover an output pixel")
    w = w / sums
    return _reflect(idx, n_in), w


def _apply_axis(arr: np.ndarray, idx: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    """Resample one axis of arr; accumulation dtype follows the input."""
    moved = np.moveaxis(arr, axis, -1)
    wt = w.astype(arr.dtype, copy=False)
    acc = np.zeros(moved.shape[:-1] + (idx.shape[0],), dtype=arr.dtype)
    for t in range(idx.shape[1]):  # tap-by-tap keeps temporaries output-sized
        acc += wt[:, t] * moved[..., idx[:, t]]
    return np.moveaxis(acc, -1, axis)


def _apply_axis_adjoint(
    grad: np.ndarray, idx: np.ndarray, w: np.ndarray, axis: int, n_in: int
) -> np.ndarray:
    """Transpose of _apply_axis; scatter-adds output grads back to inputs."""
    g = np.moveaxis(grad, axis, 0).astype(np.float64)  # (n_out, ...)
    acc = np.zeros((n_in,) + g.shape[1:], dtype=np.float64)
    for t in range(idx.shape[1]):
        np.add.at(acc, idx[:, t], g * w[:, t].reshape((-1,) + (1,) * (g.ndim - 1)))
    return np.moveaxis(acc, 0, axis)


def _down_extent(n_in: int, scale: float) -> tuple[int, int]:
    """(output length, cropped source length) for downscaling by `scale`."""
    n_out = int(math.floor(n_in / scale))
    span = n_out * scale
    cropped = int(round(span)) if abs(span - round(span)) < 1e-9 else n_in
    return n_out, min(cropped, n_in)


def axis_plans(n_in: int, scale: float, kernel: Kernel, direction: str, antialias: bool):
    """Resampling plan for a single axis of length n_in.

    Returns (n_out, crop, idx, w) where crop is the source length actually
    used (leftover pixels under floor-division are dropped when downscaling).
    """
    if direction == "down":
        n_out, crop = _down_extent(n_in, scale)
        if n_out < 1:
            raise ValueError(f"downscaling {n_in} by {scale} would produce 0 pixels")
        stretch = float(scale) if antialias and scale > 1 else 1.0
        idx, w = _plan(crop, n_out, float(scale), kernel, stretch)
        return n_out, crop, idx, w
    if direction == "up":
        n_out = int(round(n_in * scale))
        if n_out < 1:
            raise ValueError(f"upscaling {n_in} by {scale} would produce 0 pixels")
        idx, w = _plan(n_in, n_out, n_in / n_out, kernel, 1.0)
        return n_out, n_in, idx, w
    raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")


def resample(
    img: np.ndarray,
    scale: float,
    kernel: Kernel = BICUBIC,
    direction: str = "down",
    antialias: bool = True,
) -> np.ndarray:
    """Resample an image by `scale` along both axes (rows, then columns)."""
    arr = check_image(img)
    if not scale >= 1:
        raise ValueError(f"scale factor must be >= 1, got {scale}")
    _, h, w = arr.shape
    _, crop_h, idx_h, w_h = axis_plans(h, scale, kernel, direction, antialias)
    _, crop_w, idx_w, w_w = axis_plans(w, scale, kernel, direction, antialias)
    out = arr[:, :crop_h, :crop_w]
    out = _apply_axis(out, idx_h, w_h, axis=1)
    out = _apply_axis(out, idx_w, w_w, axis=2)
    return out.astype(arr.dtype)


def bicubic_upsample(img: np.ndarray, scale: float) -> np.ndarray:
    """Keys-cubic (a=-0.5) upsampling, the evaluation baseline."""
    return resample(img, scale, BICUBIC, direction="up", antialias=False)
