"""Pure-numpy conv kernels (im2col + BLAS matmul).

Fallback backend used when numba is unavailable or when DXP_BACKEND=numpy.
All arrays are float64, layout [C, H, W] for feature maps and
[Co, Ci, kh, kw] for filters. Only stride 1/2 and zero padding are supported.
"""

from __future__ import annotations

import numpy as np


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Unfold x [Ci,H,W] into columns [Ci*kh*kw, Ho*Wo]."""
    ci, h, w = x.shape
    if pad > 0:
        xp = np.zeros((ci, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + w] = x
    else:
        xp = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    s0, s1, s2 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(ci, kh, kw, ho, wo),
        strides=(s0, s1, s2, s1 * stride, s2 * stride),
        writeable=False,
    )
    return np.ascontiguousarray(windows).reshape(ci * kh * kw, ho * wo)


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    co, ci, kh, kw = w.shape
    h, wid = x.shape[1], x.shape[2]
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wid + 2 * pad - kw) // stride + 1
    cols = _im2col(x, kh, kw, stride, pad)
    out = w.reshape(co, ci * kh * kw) @ cols
    return out.reshape(co, ho, wo)


def conv2d_weight_grad(gy: np.ndarray, x: np.ndarray, kh: int, kw: int,
                       stride: int, pad: int) -> np.ndarray:
    co = gy.shape[0]
    ci = x.shape[0]
    cols = _im2col(x, kh, kw, stride, pad)
    gw = gy.reshape(co, -1) @ cols.T
    return gw.reshape(co, ci, kh, kw)


def conv2d_input_grad(gy: np.ndarray, w: np.ndarray, h: int, wid: int,
                      stride: int, pad: int) -> np.ndarray:
    co, ci, kh, kw = w.shape
    ho, wo = gy.shape[1], gy.shape[2]
    colg = (w.reshape(co, -1).T @ gy.reshape(co, -1)).reshape(ci, kh, kw, ho, wo)
    gx = np.zeros((ci, h + 2 * pad, wid + 2 * pad), dtype=gy.dtype)
    for ky in range(kh):
        for kx in range(kw):
            gx[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += colg[:, ky, kx]
    if pad > 0:
        gx = gx[:, pad:pad + h, pad:pad + wid]
    return np.ascontiguousarray(gx)
