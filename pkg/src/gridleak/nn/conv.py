"""2-D convolution as a fused graph node (im2col matmuls both ways).

The input gradient is computed as a stride-1 correlation of the
zero-dilated output gradient with the spatially flipped kernel, so the
backward pass is matmul-bound instead of scatter-bound.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Variable

Array = np.ndarray


def _im2col(x: Array, kh: int, kw: int, stride: int) -> tuple[Array, int, int]:
    """(B, C, H, W) -> ((B*Ho*Wo, C*kh*kw) patch matrix, Ho, Wo)."""
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    b, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols), ho, wo


def conv2d(x, weight, bias, stride: int = 1, padding: int = 0) -> Variable:
    """Cross-correlate (B, C, H, W) with (O, C, kh, kw) weights."""
    xv = ad._value(x)
    wv = ad._value(weight)
    bv = ad._value(bias)
    if xv.ndim != 4 or wv.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/weight, got {xv.shape}, {wv.shape}")
    if xv.shape[1] != wv.shape[1]:
        raise ShapeError(f"channel mismatch: input {xv.shape}, weight {wv.shape}")
    out_ch, in_ch, kh, kw = wv.shape
    if bv.shape != (out_ch,):
        raise ShapeError(f"bias shape {bv.shape} != ({out_ch},)")

    xp = np.pad(xv, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xv
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeError(f"input {xv.shape} smaller than kernel {wv.shape}")
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    w_mat = wv.reshape(out_ch, -1)
    out_mat = cols @ w_mat.T + bv
    batch = xv.shape[0]
    out_val = out_mat.reshape(batch, ho, wo, out_ch).transpose(0, 3, 1, 2)

    parents = tuple(p for p in (x, weight, bias) if isinstance(p, Variable))
    out = Variable(out_val, parents)

    def back(grad: Array) -> None:
        g_mat = grad.transpose(0, 2, 3, 1).reshape(-1, out_ch)
        if isinstance(weight, Variable):
            ad._accumulate(weight, (g_mat.T @ cols).reshape(wv.shape))
        if isinstance(bias, Variable):
            ad._accumulate(bias, g_mat.sum(axis=0))
        if isinstance(x, Variable):
            ad._accumulate(x, _input_grad(grad, wv, xv.shape, stride, padding))

    out._backward = back
    return out


def _input_grad(grad: Array, w: Array, x_shape: tuple, stride: int, padding: int) -> Array:
    """d(conv)/d(input): accumulate one strided block per kernel offset."""
    out_ch, in_ch, kh, kw = w.shape
    b, _, h, w_in = x_shape
    _, _, ho, wo = grad.shape
    g = np.ascontiguousarray(grad.transpose(0, 2, 3, 1))  # (B, Ho, Wo, O)
    dxp = np.zeros((b, in_ch, h + 2 * padding, w_in + 2 * padding))
    for p in range(kh):
        for q in range(kw):
            contrib = g @ w[:, :, p, q]  # (B, Ho, Wo, C)
            dxp[:, :, p:p + stride * ho:stride, q:q + stride * wo:stride] += \
                contrib.transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding:padding + h, padding:padding + w_in]
    return np.ascontiguousarray(dxp)


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def global_avg_pool(x: Variable) -> Variable:
    """(B, C, H, W) -> (B, C) mean over the spatial axes."""
    return ad.vmean(x, axis=(2, 3))
