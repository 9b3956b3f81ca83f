import numpy as np
import pytest

from simusr.image import quantize
from simusr.resample import BICUBIC, resample


def synthetic_image(height, width, seed, channels=3):
    """Deterministic natural-ish test image: gradients, blobs, edges, texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.arange(height, dtype=np.float64) / height,
        np.arange(width, dtype=np.float64) / width,
        indexing="ij",
    )
    img = np.empty((channels, height, width))
    for c in range(channels):
        img[c] = 0.5 + 0.2 * (rng.uniform(-1, 1) * xx + rng.uniform(-1, 1) * yy)
    for _ in range(8):
        cy, cx = rng.uniform(0.1, 0.9, 2)
        width_frac = rng.uniform(0.02, 0.12)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width_frac**2))
        img += rng.uniform(-0.35, 0.35, (channels, 1, 1)) * blob
    for _ in range(5):
        y0, x0 = rng.uniform(0.0, 0.7, 2)
        h0, w0 = rng.uniform(0.1, 0.3, 2)
        mask = (yy >= y0) & (yy < y0 + h0) & (xx >= x0) & (xx < x0 + w0)
        img += rng.uniform(-0.3, 0.3, (channels, 1, 1)) * mask
    for _ in range(3):
        fy, fx = rng.uniform(2.0, 9.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(0.03, 0.08, (channels, 1, 1)) * np.sin(
            2 * np.pi * (fy * yy + fx * xx) + phase
        )
    return np.clip(img, 0.02, 0.98).astype(np.float32)


def smooth_image(height, width, seed, channels=3):
    """Blobs-and-gradients only; no sharp edges (for resampling round trips)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.arange(height, dtype=np.float64) / height,
        np.arange(width, dtype=np.float64) / width,
        indexing="ij",
    )
    img = np.full((channels, height, width), 0.5)
    for _ in range(6):
        cy, cx = rng.uniform(0.1, 0.9, 2)
        width_frac = rng.uniform(0.08, 0.25)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width_frac**2))
        img += rng.uniform(-0.3, 0.3, (channels, 1, 1)) * blob
    return np.clip(img, 0.05, 0.95).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- photo-like scene synthesis for the acceptance corpus --------------------


def _spectral_field(rng, height, width, alpha):
    """Texture field with a 1/f^alpha amplitude spectrum and random phases."""
    freq_y = np.fft.fftfreq(height)[:, None]
    freq_x = np.fft.rfftfreq(width)[None, :]
    radius = np.sqrt(freq_y**2 + freq_x**2)
    radius[0, 0] = 1.0
    spec = (rng.normal(size=radius.shape) + 1j * rng.normal(size=radius.shape)) / radius**alpha
    field = np.fft.irfft2(spec, s=(height, width))
    return field / max(np.abs(field).max(), 1e-9)


def _add_glyphs(img, rng, count):
    """Scatter random dot-matrix glyphs (text-like high-contrast motifs)."""
    _, height, width = img.shape
    for _ in range(count):
        cells = rng.random((7, 5)) < 0.45
        scale = int(rng.integers(12, 28)) // 7 + 1
        glyph = np.kron(cells, np.ones((scale, scale), dtype=bool))
        gh, gw = glyph.shape
        y = int(rng.integers(0, height - gh))
        x = int(rng.integers(0, width - gw))
        ink = rng.uniform(0.0, 1.0)
        region = img[:, y : y + gh, x : x + gw]
        img[:, y : y + gh, x : x + gw] = np.where(glyph[None], ink, region)


def scene_master(height, width, seed, channels=3, regions=8, glyphs=40):
    """Hard-edged patchwork scene: textured regions, shapes, lines, glyphs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.arange(height, dtype=np.float64) / height,
        np.arange(width, dtype=np.float64) / width,
        indexing="ij",
    )
    sites = rng.uniform(0, 1, (regions, 2))
    dist = (yy[None] - sites[:, 0, None, None]) ** 2 + (xx[None] - sites[:, 1, None, None]) ** 2
    label = np.argmin(dist, axis=0)
    img = np.zeros((channels, height, width))
    for r in range(regions):
        mask = label == r
        color = rng.uniform(0.25, 0.75, channels)
        alpha = rng.uniform(0.6, 1.3)
        amp = rng.uniform(0.1, 0.35)
        grad = rng.uniform(-0.15, 0.15) * xx + rng.uniform(-0.15, 0.15) * yy
        tex = _spectral_field(rng, height, width, alpha)
        for c in range(channels):
            img[c][mask] = color[c] + grad[mask] + amp * tex[mask]
    for _ in range(8):
        kind = rng.integers(0, 3)
        amp = rng.uniform(-0.3, 0.3, (channels, 1, 1))
        if kind == 0:  # half plane
            theta = rng.uniform(0, np.pi)
            offset = rng.uniform(0.25, 0.75)
            mask = (np.cos(theta) * xx + np.sin(theta) * yy) > offset
        elif kind == 1:  # disk
            cy, cx = rng.uniform(0.1, 0.9, 2)
            rad = rng.uniform(0.03, 0.18)
            mask = ((yy - cy) ** 2 + (xx - cx) ** 2) < rad**2
        else:  # rotated bar
            theta = rng.uniform(0, np.pi)
            offset = rng.uniform(0.2, 0.8)
            d = np.abs(np.cos(theta) * xx + np.sin(theta) * yy - offset)
            mask = d < rng.uniform(0.006, 0.04)
        img += amp * mask
    img = np.clip(img, 0.02, 0.98)
    _add_glyphs(img, rng, glyphs)
    return np.clip(img, 0.02, 0.98).astype(np.float32)


def make_scene(seed, lr_size=128, noise=8 / 255):
    """One (lr, hr) evaluation pair from a camera-like downsampling cascade.

    A hard-edged master is rendered at 4x, downsampled once to give a
    band-limited HR reference, and once more plus sensor noise to give the
    observed LR image. Statistics are therefore consistent between the
    lr->hr inversion and the son->father pairs built from the LR.
    """
    master = scene_master(lr_size * 4, lr_size * 4, seed)
    hr = quantize(resample(master, 2, BICUBIC, "down", antialias=True))
    rng = np.random.default_rng(seed + 777)
    lr_clean = resample(hr, 2, BICUBIC, "down", antialias=True)
    lr = quantize(np.clip(lr_clean + rng.normal(0, noise, lr_clean.shape), 0, 1).astype(np.float32))
    return lr, hr
