"""Conv kernel backend selection.

The hot inner loops of the networks live here in two interchangeable
implementations: numba-jitted direct convolution (default) and a pure-numpy
im2col path. Selection order:

  1. env var DXP_BACKEND = "numba" | "numpy"
  2. default "numba" when importable, else "numpy"

`benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import os

from . import _numpy

_requested = os.environ.get("DXP_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"DXP_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl  # noqa: F401
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = _numpy
        BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_weight_grad = _impl.conv2d_weight_grad
conv2d_input_grad = _impl.conv2d_input_grad

__all__ = ["BACKEND", "conv2d_forward", "conv2d_weight_grad", "conv2d_input_grad"]
