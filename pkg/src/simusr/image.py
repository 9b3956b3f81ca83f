"""Planar float images and lossless 8-bit PNG I/O.

An image is a float array of shape (channels, height, width) with values
nominally in [0, 1] and channels either 1 (luma) or 3 (RGB). Files are
8-bit PNG only; pixel value p maps to p/255 on load, and saving quantizes
with round-half-away-from-zero so round trips are bit exact.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as _PILImage

# BT.601 studio-swing luma: Y' = (16 + 65.481 R + 128.553 G + 24.966 B) / 255
_Y_COEFF = np.array([65.481, 128.553, 24.966], dtype=np.float64)
_Y_OFFSET = 16.0


def check_image(img, channels: int | None = None, name: str = "image") -> np.ndarray:
    """Validate an image array: (C, H, W), C in {1, 3}, finite values."""
    arr = np.asarray(img)
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (channels, height, width), got {arr.shape}")
    c, h, w = arr.shape
    if c not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {c}")
    if channels is not None and c != channels:
        raise ValueError(f"{name} must have {channels} channels, got {c}")
    if h < 1 or w < 1:
        raise ValueError(f"{name} has empty spatial extent {h}x{w}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG as a float32 (C, H, W) array with values p/255."""
    with _PILImage.open(path) as im:
        if im.format != "PNG":
            raise ValueError(f"{path}: only PNG input is supported, got {im.format}")
        if im.mode not in ("L", "RGB"):
            raise ValueError(
                f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit grayscale or RGB)"
            )
        raw = np.asarray(im, dtype=np.uint8)
    if raw.ndim == 2:
        raw = raw[None, :, :]
    else:
        raw = raw.transpose(2, 0, 1)
    return (raw.astype(np.float32) / np.float32(255.0)).astype(np.float32)


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize to the 256 representable levels.

    Matches what a save/load round trip produces, without touching disk.
    """
    return (quantize_u8(img).astype(np.float32) / np.float32(255.0)).astype(np.float32)


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and map to uint8 via round(v*255) half away from zero."""
    arr = check_image(img)
    clipped = np.clip(arr.astype(np.float64), 0.0, 1.0)
    # floor(x + 0.5) is round-half-away-from-zero for non-negative x
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Save as 8-bit PNG (grayscale or RGB), clamping and quantizing values."""
    q = quantize_u8(img)
    if q.shape[0] == 1:
        pil = _PILImage.fromarray(q[0], mode="L")
    else:
        pil = _PILImage.fromarray(q.transpose(1, 2, 0), mode="RGB")
    pil.save(path, format="PNG")


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """BT.601 studio-swing luma of an RGB image, as a single-channel image.

    Output lies in [16/255, 235/255] for inputs in [0, 1].
    """
    arr = check_image(img, channels=3)
    y = (_Y_OFFSET + np.tensordot(_Y_COEFF, arr.astype(np.float64), axes=(0, 0))) / 255.0
    return y[None, :, :].astype(arr.dtype)


def shave_border(img: np.ndarray, n: int) -> np.ndarray:
    """Centered crop removing an n-pixel border on every side."""
    arr = check_image(img)
    if n < 0:
        raise ValueError(f"border width must be >= 0, got {n}")
    if n == 0:
        return arr
    _, h, w = arr.shape
    if 2 * n >= min(h, w):
        raise ValueError(f"shaving {n} pixels from a {h}x{w} image leaves nothing")
    return arr[:, n : h - n, n : w - n]
