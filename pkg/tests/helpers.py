"""Shared test oracles: finite differences and direct-summation conv.

These stay independent of the library code paths they check: the FD oracle
only calls the forward function, and the conv reference is a plain quadruple
loop over the definition.
"""

from __future__ import annotations

import numpy as np

from segexpand.autodiff import Tape, Tensor


def fd_gradient(f, arrays: list[np.ndarray], index: int, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f(arrays) wrt arrays[index]."""
    base = [a.copy() for a in arrays]
    x = base[index]
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(base)
        flat[i] = orig - h
        fm = f(base)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def check_grad(build, arrays: list[np.ndarray], h: float = 1e-5,
               tol: float = 1e-5) -> float:
    """Compare tape gradients of scalar `build(tensors) -> Tensor` against FD.

    Returns the worst relative error over all inputs; asserts it is <= tol.
    Relative error uses max(1, |analytic|, |fd|) as denominator so near-zero
    entries are judged absolutely.
    """
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = build(tensors)
        grads = tape.backward(loss)

    def scalar_f(arrs):
        vals = [Tensor(a) for a in arrs]
        return float(build(vals).data)

    worst = 0.0
    for i, t in enumerate(tensors):
        analytic = grads[t.node_id].data
        fd = fd_gradient(scalar_f, arrays, i, h=h)
        denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(fd)))
        err = float(np.max(np.abs(analytic - fd) / denom))
        worst = max(worst, err)
    assert worst <= tol, f"gradient mismatch: rel err {worst:.3e} > {tol:.1e}"
    return worst


def conv2d_reference(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """Direct-summation conv oracle (cross-correlation), O(everything) loops."""
    ci, h, wid = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wid + 2 * pad - kw) // stride + 1
    y = np.zeros((co, ho, wo))
    for oc in range(co):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for ic in range(ci):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride + ky - pad
                            ix = ox * stride + kx - pad
                            if 0 <= iy < h and 0 <= ix < wid:
                                acc += x[ic, iy, ix] * w[oc, ic, ky, kx]
                y[oc, oy, ox] = acc
    return y
