"""Scikit-learn style estimators wrapping the pipeline.

`SimUSR` is the offline flow: fit() builds pseudo-pairs from a corpus of
LR images and trains the micro network; predict() is a plain forward pass.
`ZSSR` is the online baseline: there is nothing to fit offline, and each
predict() call trains a fresh model on the test image itself. `BM3DDenoiser`
is a stateless transformer around the block-matching denoiser.

Images are float arrays of shape (channels, height, width) in [0, 1]; the
estimators accept a single image or a list of images and return the same
form.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .denoise import DenoiseConfig, apply_denoise
from .image import check_image
from .nn import ModelConfig
from .pairs import AugmentPolicy, PairSetSpec, build_pairs
from .resample import parse_kernel
from .train import TrainConfig, ZssrConfig, infer, train_simusr, train_zssr


def check_image_list(X, name: str = "X") -> tuple[list[np.ndarray], bool]:
    """Validate estimator input: one image or a list of images.

    Returns (images, single) where `single` records whether the caller
    passed a bare image, so outputs can mirror the input form.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_image(X, name=name)], True
    if isinstance(X, (list, tuple)):
        if not X:
            raise ValueError(f"{name} is empty")
        return [check_image(img, name=f"{name}[{i}]") for i, img in enumerate(X)], False
    raise ValueError(
        f"{name} must be a (C, H, W) array or a list of them, got {type(X).__name__}"
    )


class SimUSR(BaseEstimator):
    """Unsupervised super-resolution trained offline on pseudo-pairs.

    fit(X) treats every LR image in X as a pseudo-HR target, pairs it with
    its own downscaled copy, and trains a small residual network; predict(X)
    upscales new LR images with a single forward pass.

    Parameters
    ----------
    scale : upscaling factor (2, 3, or 4).
    kernel : downsampling kernel spec for son generation (e.g. "keys:-0.5").
    denoise : "off", "auto", or "sigma=<v>"; applied to training fathers and,
        by default, to inference inputs.
    augment : "off", "geo", or "moa" (geometric plus photometric mixture).
    steps, batch, lr_patch, lr, seed : training loop settings.
    features, blocks : micro backbone size.
    """

    def __init__(
        self,
        scale: int = 2,
        kernel: str = "keys:-0.5",
        denoise: str = "off",
        augment: str = "moa",
        steps: int = 2000,
        batch: int = 8,
        lr_patch: int = 16,
        lr: float = 1e-3,
        seed: int = 0,
        features: int = 32,
        blocks: int = 3,
    ):
        self.scale = scale
        self.kernel = kernel
        self.denoise = denoise
        self.augment = augment
        self.steps = steps
        self.batch = batch
        self.lr_patch = lr_patch
        self.lr = lr
        self.seed = seed
        self.features = features
        self.blocks = blocks

    def fit(self, X, y=None):
        images, _ = check_image_list(X)
        spec = PairSetSpec(
            count=len(images),
            scale=self.scale,
            kernel=parse_kernel(self.kernel),
            denoise=self.denoise,
            seed=self.seed,
        )
        pairs = build_pairs(spec, images)
        cfg = TrainConfig(
            steps=self.steps,
            batch=self.batch,
            lr_patch=self.lr_patch,
            lr=self.lr,
            seed=self.seed,
            scale=self.scale,
            augment=AugmentPolicy.named(self.augment),
        )
        model_cfg = ModelConfig(
            in_channels=images[0].shape[0],
            features=self.features,
            blocks=self.blocks,
            scale=self.scale,
        )
        self.checkpoint_, self.log_ = train_simusr(pairs, cfg, model_cfg)
        return self

    def predict(self, X):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("SimUSR.predict called before fit")
        images, single = check_image_list(X)
        out = [infer(self.checkpoint_, img, denoise=self.denoise) for img in images]
        return out[0] if single else out


class ZSSR(BaseEstimator):
    """Online single-image baseline: trains at prediction time.

    fit() is a no-op kept for API compatibility; predict(X) optimizes a
    fresh micro network on each input's own pseudo-pair (geometric
    augmentation only) and returns its output on the full image.
    """

    def __init__(
        self,
        scale: int = 2,
        steps: int = 1000,
        lr_patch: int = 32,
        lr: float = 1e-3,
        denoise: str = "off",
        seed: int = 0,
        features: int = 32,
        blocks: int = 3,
    ):
        self.scale = scale
        self.steps = steps
        self.lr_patch = lr_patch
        self.lr = lr
        self.denoise = denoise
        self.seed = seed
        self.features = features
        self.blocks = blocks

    def fit(self, X=None, y=None):
        return self

    def predict(self, X):
        images, single = check_image_list(X)
        cfg = ZssrConfig(
            steps=self.steps,
            lr=self.lr,
            lr_patch=self.lr_patch,
            seed=self.seed,
            denoise=self.denoise,
        )
        out = []
        for img in images:
            model_cfg = ModelConfig(
                in_channels=img.shape[0],
                features=self.features,
                blocks=self.blocks,
                scale=self.scale,
            )
            out.append(train_zssr(img, cfg, model_cfg).sr)
        return out[0] if single else out


class BM3DDenoiser(TransformerMixin, BaseEstimator):
    """Stateless block-matching denoiser with a transformer interface.

    sigma may be "auto" (estimated per image), a float noise level in [0, 1]
    units, or 0 for the identity.
    """

    def __init__(
        self,
        sigma: float | str = "auto",
        block: int = 8,
        search_window: int = 21,
        max_matches: int = 16,
        hard_threshold: float = 2.7,
    ):
        self.sigma = sigma
        self.block = block
        self.search_window = search_window
        self.max_matches = max_matches
        self.hard_threshold = hard_threshold

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        images, single = check_image_list(X)
        setting = self.sigma if isinstance(self.sigma, str) else f"sigma={self.sigma:g}"
        cfg = DenoiseConfig(
            block=self.block,
            search_window=self.search_window,
            max_matches=self.max_matches,
            hard_threshold=self.hard_threshold,
        )
        out = [apply_denoise(img, setting, cfg) for img in images]
        return out[0] if single else out
