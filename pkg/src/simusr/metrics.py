"""PSNR, SSIM, and wall-clock latency measurement.

PSNR uses peak 1.0 and reports math.inf for identical images rather than
overflowing. SSIM is the single-scale index with an 11x11 Gaussian window
(sigma 1.5), K1=0.01, K2=0.03, averaged over valid windows and, for RGB,
over channels. Both metrics optionally convert to the BT.601 luma channel
first and shave a border before comparing (the usual convention shaves
`scale` pixels).
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import check_image, rgb_to_y, shave_border

_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


@dataclass
class MetricReport:
    psnr_db: float  # math.inf when images are identical
    ssim: float
    mode: str
    shave: int
    latency_ms: float | None = None


def _prepare(a, b, mode: str, shave: int):
    a = check_image(a, name="first image")
    b = check_image(b, name="second image")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if mode not in ("rgb", "y"):
        raise ValueError(f"mode must be 'rgb' or 'y', got {mode!r}")
    if mode == "y" and a.shape[0] == 3:
        a, b = rgb_to_y(a), rgb_to_y(b)
    if shave:
        a, b = shave_border(a, shave), shave_border(b, shave)
    return a.astype(np.float64), b.astype(np.float64)


def psnr(a, b, mode: str = "rgb", shave: int = 0) -> float:
    """10*log10(1 / MSE) against peak 1.0; inf for identical images."""
    a, b = _prepare(a, b, mode, shave)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(1.0 / mse))


def _gauss_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a normalized 1D window."""
    tmp = sliding_window_view(plane, window.size, axis=0) @ window
    return sliding_window_view(tmp, window.size, axis=1) @ window


def ssim(a, b, mode: str = "rgb", shave: int = 0) -> float:
    a, b = _prepare(a, b, mode, shave)
    if min(a.shape[1], a.shape[2]) < _SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} after shaving, "
            f"got {a.shape[1]}x{a.shape[2]}"
        )
    window = _gauss_window()
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    values = []
    for x, y in zip(a, b):
        mx = _filter_valid(x, window)
        my = _filter_valid(y, window)
        vx = _filter_valid(x * x, window) - mx * mx
        vy = _filter_valid(y * y, window) - my * my
        cxy = _filter_valid(x * y, window) - mx * my
        num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        values.append(np.mean(num / den))
    return float(np.mean(values))


@dataclass
class LatencyReport:
    job: str
    params_count: int
    median_ms: float
    runs_ms: list[float] = field(default_factory=list)

    def variance(self) -> float:
        return statistics.pvariance(self.runs_ms) if len(self.runs_ms) > 1 else 0.0

    def as_dict(self) -> dict:
        return {
            "job": self.job,
            "params_count": self.params_count,
            "median_ms": self.median_ms,
            "runs_ms": [round(r, 3) for r in self.runs_ms],
            "variance_ms2": round(self.variance(), 3),
        }


def bench_latency(job: str, run, repeats: int, params_count: int) -> LatencyReport:
    """Time a zero-argument job on the calling thread.

    simusr_infer runs once untimed to warm caches and then needs at least 3
    timed repeats (the median is reported); zssr_full may use repeats=1
    since every run retrains from scratch.
    """
    if job not in ("simusr_infer", "zssr_full"):
        raise ValueError(f"unknown job {job!r} (simusr_infer or zssr_full)")
    if job == "simusr_infer":
        if repeats < 3:
            raise ValueError("simusr_infer needs repeats >= 3 for a stable median")
        run()  # warm-up, excluded
    elif repeats < 1:
        raise ValueError("repeats must be >= 1")
    runs = []
    for _ in range(repeats):
        begin = time.perf_counter()
        run()
        runs.append((time.perf_counter() - begin) * 1e3)
    return LatencyReport(
        job=job,
        params_count=params_count,
        median_ms=float(statistics.median(runs)),
        runs_ms=runs,
    )
