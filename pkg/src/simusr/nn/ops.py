"""Differentiable ops for the micro SR network (NCHW layout).

Convolutions use reflect padding so spatial dims are preserved and constant
inputs stay constant. All ops keep the dtype of their inputs, so gradient
checks can run in float64 while training runs in float32.
"""

from __future__ import annotations

import numpy as np

from ..resample import BICUBIC, axis_plans, _apply_axis, _apply_axis_adjoint
from .tensor import Tensor


def _requires(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def _im2col(padded: np.ndarray, kh: int, kw: int, h: int, w: int) -> np.ndarray:
    """(N, C, H+2p, W+2p) -> (N, C*kh*kw, H*W) patch matrix."""
    n, c = padded.shape[:2]
    slices = [
        padded[:, :, i : i + h, j : j + w] for i in range(kh) for j in range(kw)
    ]
    cols = np.stack(slices, axis=2)  # (N, C, kh*kw, H, W)
    return cols.reshape(n, c * kh * kw, h * w)


def _fold_reflect(gp: np.ndarray, pad: int) -> np.ndarray:
    """Adjoint of reflect padding: fold border grads back onto the interior."""
    if pad == 0:
        return gp
    n, c, hp, wp = gp.shape
    h, w = hp - 2 * pad, wp - 2 * pad
    gh = gp[:, :, pad : pad + h, :].copy()
    for o in range(1, pad + 1):
        gh[:, :, o, :] += gp[:, :, pad - o, :]
        gh[:, :, h - 1 - o, :] += gp[:, :, pad + h - 1 + o, :]
    gw = gh[:, :, :, pad : pad + w].copy()
    for o in range(1, pad + 1):
        gw[:, :, :, o] += gh[:, :, :, pad - o]
        gw[:, :, :, w - 1 - o] += gh[:, :, :, pad + w - 1 + o]
    return gw


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Cross-correlation with reflect same-padding; kernels 3x3 or 1x1."""
    xd, wd, bd = x.data, weight.data, bias.data
    if xd.ndim != 4:
        raise ValueError(f"conv2d input must be NCHW, got shape {xd.shape}")
    out_c, in_c, kh, kw = wd.shape
    if kh != kw or kh not in (1, 3):
        raise ValueError(f"conv2d supports 1x1 and 3x3 kernels, got {kh}x{kw}")
    if xd.shape[1] != in_c:
        raise ValueError(f"input has {xd.shape[1]} channels, weight expects {in_c}")
    if bd.shape != (out_c,):
        raise ValueError(f"bias shape {bd.shape} does not match {out_c} filters")
    n, _, h, w = xd.shape
    pad = kh // 2
    padded = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="reflect") if pad else xd
    cols = _im2col(padded, kh, kw, h, w)
    w2d = wd.reshape(out_c, in_c * kh * kw)
    out = np.matmul(w2d, cols).reshape(n, out_c, h, w) + bd.reshape(1, out_c, 1, 1)

    def backward(grad):
        gm = grad.reshape(n, out_c, h * w)
        gw = gb = gx = None
        if weight.requires_grad:
            gw = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
        if bias.requires_grad:
            gb = grad.sum(axis=(0, 2, 3))
        if x.requires_grad:
            gcols = np.matmul(w2d.T, gm).reshape(n, in_c, kh * kw, h, w)
            gpad = np.zeros_like(padded)
            k = 0
            for i in range(kh):
                for j in range(kw):
                    gpad[:, :, i : i + h, j : j + w] += gcols[:, :, k]
                    k += 1
            gx = _fold_reflect(gpad, pad)
        return gx, gw, gb

    return Tensor(out, _requires(x, weight, bias), (x, weight, bias), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0)

    def backward(grad):
        return (grad * mask,)

    return Tensor(out, x.requires_grad, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def backward(grad):
        return grad, grad

    return Tensor(a.data + b.data, _requires(a, b), (a, b), backward)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(N, C*r*r, H, W) -> (N, C, r*H, r*W) channel-to-space rearrangement."""
    n, crr, h, w = x.data.shape
    if crr % (r * r) != 0:
        raise ValueError(f"{crr} channels are not divisible by r^2 = {r * r}")
    c = crr // (r * r)
    out = (
        x.data.reshape(n, c, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, c, h * r, w * r)
    )

    def backward(grad):
        g = (
            grad.reshape(n, c, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, crr, h, w)
        )
        return (g,)

    return Tensor(out, x.requires_grad, (x,), backward)


def upsample2d(x: Tensor, scale: int) -> Tensor:
    """Differentiable Keys-cubic upsampling; the model's global skip branch."""
    n, c, h, w = x.data.shape
    _, _, idx_h, w_h = axis_plans(h, scale, BICUBIC, "up", antialias=False)
    _, _, idx_w, w_w = axis_plans(w, scale, BICUBIC, "up", antialias=False)
    out = _apply_axis(_apply_axis(x.data, idx_h, w_h, 2), idx_w, w_w, 3)

    def backward(grad):
        g = _apply_axis_adjoint(grad, idx_w, w_w, 3, w)
        g = _apply_axis_adjoint(g, idx_h, w_h, 2, h)
        return (g.astype(x.data.dtype),)

    return Tensor(out.astype(x.data.dtype), x.requires_grad, (x,), backward)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; gradient is sign(pred - target) / count."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"loss shape mismatch: {pred.data.shape} vs {target.data.shape}"
        )
    diff = pred.data - target.data
    out = np.abs(diff).mean(dtype=np.float64).astype(pred.data.dtype)

    def backward(grad):
        g = grad * np.sign(diff) / diff.size
        return g.astype(pred.data.dtype), None

    return Tensor(out, _requires(pred, target), (pred, target), backward)
