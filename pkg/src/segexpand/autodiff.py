"""Reverse-mode automatic differentiation over dense float64 tensors.

Tensors are immutable values; operations are pure functions that record a
backward rule on the thread-local active tape whenever an input participates
in differentiation. The tape's record order is a topological order of the
graph (no in-place mutation exists), so `Tape.backward` is a single reverse
sweep with gradient accumulation keyed by node id.

Conv kernels are delegated to `segexpand.kernels` (numba or numpy backend);
everything else is plain vectorized numpy.
"""

from __future__ import annotations

import itertools
import threading

import numpy as np

from . import kernels

_ids = itertools.count(1)
_local = threading.local()


def _active_tape():
    stack = getattr(_local, "tapes", None)
    return stack[-1] if stack else None


class Tensor:
    """Immutable dense float64 array with an optional tape identity."""

    __slots__ = ("data", "requires_grad", "node_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return data if isinstance(data, Tensor) and not requires_grad else Tensor(
        data.data if isinstance(data, Tensor) else data, requires_grad)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Recording of primitive operations for one thread of execution."""

    def __init__(self):
        self._ops: list[tuple[int, tuple[int, ...], object]] = []

    def __enter__(self):
        stack = getattr(_local, "tapes", None)
        if stack is None:
            stack = _local.tapes = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.tapes.pop()
        return False

    def _record(self, out_id: int, parent_ids: tuple[int, ...], backward_fn) -> None:
        self._ops.append((out_id, parent_ids, backward_fn))

    def backward(self, loss: Tensor) -> dict[int, Tensor]:
        """Gradients of a scalar loss wrt every participating requires_grad tensor."""
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for out_id, parent_ids, backward_fn in reversed(self._ops):
            g = grads.get(out_id)
            if g is None:
                continue
            backward_fn(g, grads)
        return {nid: Tensor(g) for nid, g in grads.items()}


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce grad back to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accum(grads: dict, nid: int, g: np.ndarray) -> None:
    prev = grads.get(nid)
    grads[nid] = g if prev is None else prev + g


def _make_result(out_data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = _active_tape()
    track = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=track)
    if track:
        tape._record(out.node_id, tuple(p.node_id for p in parents), backward_fn)
    return out


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data + b.data

    def bwd(g, grads):
        if a.requires_grad:
            _accum(grads, a.node_id, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(grads, b.node_id, _unbroadcast(g, b.data.shape))

    return _make_result(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data - b.data

    def bwd(g, grads):
        if a.requires_grad:
            _accum(grads, a.node_id, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(grads, b.node_id, _unbroadcast(-g, b.data.shape))

    return _make_result(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data * b.data

    def bwd(g, grads):
        if a.requires_grad:
            _accum(grads, a.node_id, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(grads, b.node_id, _unbroadcast(g * a.data, b.data.shape))

    return _make_result(out, (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim > 2 or b.data.ndim > 2:
        raise ValueError(f"matmul supports 1-D/2-D operands, got {a.data.shape} @ {b.data.shape}")
    try:
        out = a.data @ b.data
    except ValueError as e:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}") from e

    def bwd(g, grads):
        ad, bd = a.data, b.data
        if a.requires_grad:
            if ad.ndim == 1 and bd.ndim == 1:
                ga = g * bd
            elif ad.ndim == 2 and bd.ndim == 1:
                ga = np.outer(g, bd)
            elif ad.ndim == 1 and bd.ndim == 2:
                ga = bd @ g
            else:
                ga = g @ bd.T
            _accum(grads, a.node_id, ga)
        if b.requires_grad:
            if ad.ndim == 1 and bd.ndim == 1:
                gb = g * ad
            elif ad.ndim == 2 and bd.ndim == 1:
                gb = ad.T @ g
            elif ad.ndim == 1 and bd.ndim == 2:
                gb = np.outer(ad, g)
            else:
                gb = ad.T @ g
            _accum(grads, b.node_id, gb)

    return _make_result(out, (a, b), bwd)


def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation: x [Ci,H,W], w [Co,Ci,kh,kw] -> [Co,Ho,Wo]."""
    x, w = _coerce(x), _coerce(w)
    if stride not in (1, 2):
        raise ValueError(f"conv2d stride must be 1 or 2, got {stride}")
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects x [Ci,H,W] and w [Co,Ci,kh,kw], got {x.data.shape}, {w.data.shape}")
    ci, h, wid = x.data.shape
    co, ciw, kh, kw = w.data.shape
    if ci != ciw:
        raise ValueError(f"conv2d channel mismatch: x has {ci}, w expects {ciw}")
    if h + 2 * padding < kh or wid + 2 * padding < kw:
        raise ValueError(f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{wid + 2 * padding}")
    out = kernels.conv2d_forward(x.data, w.data, stride, padding)

    def bwd(g, grads):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(grads, x.node_id,
                   kernels.conv2d_input_grad(g, w.data, h, wid, stride, padding))
        if w.requires_grad:
            _accum(grads, w.node_id,
                   kernels.conv2d_weight_grad(g, x.data, kh, kw, stride, padding))

    return _make_result(out, (x, w), bwd)


def relu(x) -> Tensor:
    x = _coerce(x)
    out = np.maximum(x.data, 0.0)

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g * (x.data > 0.0))

    return _make_result(out, (x,), bwd)


def silu(x) -> Tensor:
    x = _coerce(x)
    s = _sigmoid_np(x.data)
    out = x.data * s

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g * (s * (1.0 + x.data * (1.0 - s))))

    return _make_result(out, (x,), bwd)


def _sigmoid_np(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    x = _coerce(x)
    s = _sigmoid_np(x.data)

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g * s * (1.0 - s))

    return _make_result(s, (x,), bwd)


def softmax(x, axis: int = -1) -> Tensor:
    x = _coerce(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bwd(g, grads):
        if x.requires_grad:
            inner = (g * s).sum(axis=axis, keepdims=True)
            _accum(grads, x.node_id, s * (g - inner))

    return _make_result(s, (x,), bwd)


def log(x) -> Tensor:
    x = _coerce(x)
    out = np.log(x.data)

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g / x.data)

    return _make_result(out, (x,), bwd)


def exp(x) -> Tensor:
    x = _coerce(x)
    out = np.exp(x.data)

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g * out)

    return _make_result(out, (x,), bwd)


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _coerce(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g, grads):
        if x.requires_grad:
            gg = np.asarray(g)
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            _accum(grads, x.node_id, np.broadcast_to(gg, x.data.shape).copy())

    return _make_result(out, (x,), bwd)


def mean_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _coerce(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    n = x.data.size if axis is None else x.data.shape[axis] if isinstance(axis, int) else int(
        np.prod([x.data.shape[a] for a in axis]))

    def bwd(g, grads):
        if x.requires_grad:
            gg = np.asarray(g) / n
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            _accum(grads, x.node_id, np.broadcast_to(gg, x.data.shape).copy())

    return _make_result(out, (x,), bwd)


def slice_(x, key) -> Tensor:
    """Basic slicing (int/slice/tuple); gradient scatters into zeros."""
    x = _coerce(x)
    out = x.data[key]

    def bwd(g, grads):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[key] = g
            _accum(grads, x.node_id, gx)

    return _make_result(np.ascontiguousarray(out), (x,), bwd)


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_coerce(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, grads):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [np.s_[:]] * g.ndim
                idx[axis] = np.s_[lo:hi]
                _accum(grads, p.node_id, np.ascontiguousarray(g[tuple(idx)]))

    return _make_result(out, tuple(parts), bwd)


def broadcast_to(x, shape) -> Tensor:
    x = _coerce(x)
    out = np.broadcast_to(x.data, shape).copy()

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, _unbroadcast(g, x.data.shape))

    return _make_result(out, (x,), bwd)


def reshape(x, shape) -> Tensor:
    x = _coerce(x)
    out = x.data.reshape(shape)

    def bwd(g, grads):
        if x.requires_grad:
            _accum(grads, x.node_id, g.reshape(x.data.shape))

    return _make_result(out, (x,), bwd)


def upsample2x(x) -> Tensor:
    """Nearest-neighbour 2x upsampling of [C,H,W]; gradient is 2x2 sum pooling."""
    x = _coerce(x)
    out = x.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def bwd(g, grads):
        if x.requires_grad:
            c, h, w = x.data.shape
            _accum(grads, x.node_id, g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)))

    return _make_result(out, (x,), bwd)


__all__ = [
    "Tensor", "Tape", "tensor",
    "add", "sub", "mul", "matmul", "conv2d", "relu", "silu", "sigmoid",
    "softmax", "log", "exp", "sum_", "mean_", "slice_", "concat",
    "broadcast_to", "reshape", "upsample2x",
]
