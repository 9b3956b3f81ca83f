"""Unsupervised super-resolution from pseudo-pairs of LR images.

The package builds (downscaled, original) pseudo-pairs from a corpus of
low-resolution images, trains a small SR network offline, and runs fast
inference online; a single-image online-training mode is included as the
latency/quality baseline.
"""

from .estimators import BM3DDenoiser, SimUSR, ZSSR

__version__ = "0.1.0"

__all__ = ["BM3DDenoiser", "SimUSR", "ZSSR", "__version__"]
