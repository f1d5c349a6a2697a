"""Numba-jitted direct conv kernels.

Same CHW contracts as kernels._numpy. Internally the arrays are transposed to
channels-last so the innermost loop is a contiguous dot over channels, which
LLVM turns into SIMD reductions; fastmath only reassociates those sums.
First call per signature pays the JIT cost (cached on disk).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _fwd_cl(x, w, stride, pad):
    # x [H,W,Ci], w [kh,kw,Co,Ci] -> y [Ho,Wo,Co]
    h, wid, ci = x.shape
    kh, kw, co, _ = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wid + 2 * pad - kw) // stride + 1
    y = np.zeros((ho, wo, co), dtype=np.float64)
    for oy in range(ho):
        for ox in range(wo):
            yv = y[oy, ox]
            for ky in range(kh):
                iy = oy * stride + ky - pad
                if iy < 0 or iy >= h:
                    continue
                for kx in range(kw):
                    ix = ox * stride + kx - pad
                    if ix < 0 or ix >= wid:
                        continue
                    xv = x[iy, ix]
                    wv = w[ky, kx]
                    for oc in range(co):
                        wr = wv[oc]
                        acc = 0.0
                        for ic in range(ci):
                            acc += xv[ic] * wr[ic]
                        yv[oc] += acc
    return y


@njit(cache=True, fastmath=True)
def _wgrad_cl(gy, x, kh, kw, stride, pad):
    # gy [Ho,Wo,Co], x [H,W,Ci] -> gw [kh,kw,Co,Ci]
    ho, wo, co = gy.shape
    h, wid, ci = x.shape
    gw = np.zeros((kh, kw, co, ci), dtype=np.float64)
    for oy in range(ho):
        for ox in range(wo):
            gv = gy[oy, ox]
            for ky in range(kh):
                iy = oy * stride + ky - pad
                if iy < 0 or iy >= h:
                    continue
                for kx in range(kw):
                    ix = ox * stride + kx - pad
                    if ix < 0 or ix >= wid:
                        continue
                    xv = x[iy, ix]
                    gwv = gw[ky, kx]
                    for oc in range(co):
                        g = gv[oc]
                        gr = gwv[oc]
                        for ic in range(ci):
                            gr[ic] += g * xv[ic]
    return gw


@njit(cache=True, fastmath=True)
def _igrad_cl(gy, w, h, wid, stride, pad):
    # gy [Ho,Wo,Co], w [kh,kw,Co,Ci] -> gx [H,W,Ci]
    ho, wo, co = gy.shape
    kh, kw, _, ci = w.shape
    gx = np.zeros((h, wid, ci), dtype=np.float64)
    for oy in range(ho):
        for ox in range(wo):
            gv = gy[oy, ox]
            for ky in range(kh):
                iy = oy * stride + ky - pad
                if iy < 0 or iy >= h:
                    continue
                for kx in range(kw):
                    ix = ox * stride + kx - pad
                    if ix < 0 or ix >= wid:
                        continue
                    gxv = gx[iy, ix]
                    wv = w[ky, kx]
                    for oc in range(co):
                        g = gv[oc]
                        wr = wv[oc]
                        for ic in range(ci):
                            gxv[ic] += g * wr[ic]
    return gx


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    xc = np.ascontiguousarray(x.transpose(1, 2, 0))
    wc = np.ascontiguousarray(w.transpose(2, 3, 0, 1))
    return np.ascontiguousarray(_fwd_cl(xc, wc, stride, pad).transpose(2, 0, 1))


def conv2d_weight_grad(gy: np.ndarray, x: np.ndarray, kh: int, kw: int,
                       stride: int, pad: int) -> np.ndarray:
    gyc = np.ascontiguousarray(gy.transpose(1, 2, 0))
    xc = np.ascontiguousarray(x.transpose(1, 2, 0))
    return np.ascontiguousarray(_wgrad_cl(gyc, xc, kh, kw, stride, pad).transpose(2, 3, 0, 1))


def conv2d_input_grad(gy: np.ndarray, w: np.ndarray, h: int, wid: int,
                      stride: int, pad: int) -> np.ndarray:
    gyc = np.ascontiguousarray(gy.transpose(1, 2, 0))
    wc = np.ascontiguousarray(w.transpose(2, 3, 0, 1))
    return np.ascontiguousarray(_igrad_cl(gyc, wc, h, wid, stride, pad).transpose(2, 0, 1))
