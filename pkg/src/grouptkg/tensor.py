"""Tape-based reverse-mode automatic differentiation over numpy arrays.

Only the primitives the model needs are provided.  Every forward op checks
its output for NaN/Inf and validates shapes, raising ``ShapeError`` or
``NonFiniteError`` with the op name.

Usage::

    with Tape() as tape:
        loss = tsum(matmul(W, x))
    (gW,) = backward(tape, loss, [W])
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "node_id", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if type(data) is np.ndarray and dtype is None and data.dtype.kind == "f":
            arr = data
        else:
            arr = np.asarray(data, dtype=dtype)
            if arr.dtype.kind != "f":
                arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.node_id: int | None = None
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


class _Node:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended as ops execute, so the list is already topologically
    sorted.  A tape becomes the recording target while used as a context
    manager; with no active tape nothing is recorded.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward_fn: Callable) -> None:
        output.node_id = len(self.nodes)
        self.nodes.append(_Node(tuple(inputs), output, backward_fn))

    def __len__(self):
        return len(self.nodes)

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False


_TAPES: list[Tape | None] = []


@contextlib.contextmanager
def no_grad():
    """Suspend recording, e.g. during evaluation."""
    _TAPES.append(None)
    try:
        yield
    finally:
        _TAPES.pop()


def _active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype or DEFAULT_DTYPE))


def _emit(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op}: non-finite value in output of shape {data.shape}")
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    tape = _active_tape()
    if needs and tape is not None:
        tape.record(inputs, out, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _binary_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    # Allowed: equal shapes, scalars, trailing-row vectors (biases) and (n, 1) columns.
    # The result must equal one of the operand shapes.
    if a.shape == b.shape:
        return a.shape
    try:
        out = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None
    if out != a.shape and out != b.shape:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")
    return out


# -- elementwise -----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shape("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit("add", a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shape("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit("sub", a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shape("mul", a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit("mul", a.data * b.data, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a Python scalar constant."""
    a = as_tensor(a)
    return _emit("scale", a.data * c, (a,), lambda g: (g * c,))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = expit(a.data)
    return _emit("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _emit("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _emit("relu", a.data * mask, (a,), lambda g: (g * mask,))


# -- linear algebra and shape ----------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or (a.ndim == 1 and b.ndim == 1):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} and {b.shape}")

    def bw(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ b.data.T, a.data.T @ g
        if a.ndim == 1:
            return b.data @ g, np.outer(a.data, g)
        return np.outer(g, b.data), a.data.T @ g

    return _emit("matmul", a.data @ b.data, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return _emit("transpose", a.data.T, (a,), lambda g: (g.T,))


def permute(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"permute: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return _emit("permute", a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}") from None
    return _emit("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    ts = [as_tensor(t) for t in tensors]
    lead = ts[0].shape[:-1]
    for t in ts[1:]:
        if t.shape[:-1] != lead:
            raise ShapeError(f"concat: leading shapes differ, {ts[0].shape} and {t.shape}")
    sizes = [t.shape[-1] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=-1))

    return _emit("concat", np.concatenate([t.data for t in ts], axis=-1), ts, bw)


def _scatter_matrix(idx: np.ndarray, n_rows: int) -> sp.csr_matrix:
    # (n_rows, len(idx)) 0/1 matrix; S @ g sums rows of g into their target rows
    return sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(n_rows, len(idx)))


def _scatter_add(idx: np.ndarray, values: np.ndarray, n_rows: int) -> np.ndarray:
    n = len(idx)
    if n and (n == 1 or (idx[1:] > idx[:-1]).all()):
        # distinct targets: plain assignment
        out = np.zeros((n_rows,) + values.shape[1:], dtype=values.dtype)
        out[idx] = values
        return out
    flat = values.reshape(n, -1)
    if n_rows * n <= 40_000:
        S = np.zeros((n_rows, n), dtype=values.dtype)
        S[idx, np.arange(n)] = 1.0
        out = S @ flat
    else:
        out = np.asarray(_scatter_matrix(idx, n_rows) @ flat, dtype=values.dtype)
    return out.reshape((n_rows,) + values.shape[1:])


def gather_rows(a: Tensor, index) -> Tensor:
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for shape {a.shape}")

    def bw(g):
        return (_scatter_add(idx, g, a.shape[0]),)

    return _emit("gather_rows", a.data[idx], (a,), bw)


def scatter_add_rows(a: Tensor, index, n_rows: int) -> Tensor:
    """Sum rows of ``a`` into an ``n_rows``-row output at positions ``index``."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.intp)
    if idx.shape != a.shape[:1]:
        raise ShapeError(f"scatter_add_rows: index shape {idx.shape} vs input {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        raise ShapeError(f"scatter_add_rows: index out of range for {n_rows} rows")
    out = _scatter_add(idx, a.data, n_rows)
    return _emit("scatter_add_rows", out, (a,), lambda g: (g[idx],))


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _emit("sum", np.asarray(out), (a,), bw)


def mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _emit("mean", np.asarray(out), (a,), bw)


# -- model-specific primitives ---------------------------------------------------


def _sparsemax_np(z: np.ndarray) -> np.ndarray:
    m = z.shape[1]
    zs = -np.sort(-z, axis=1, kind="stable")
    cs = np.cumsum(zs, axis=1)
    k = np.arange(1, m + 1, dtype=z.dtype)
    support = 1.0 + k * zs > cs
    # the condition holds on a prefix; the largest k is the prefix length
    k_max = m - np.argmax(support[:, ::-1], axis=1)
    tau = (cs[np.arange(z.shape[0]), k_max - 1] - 1.0) / k_max
    return np.maximum(z - tau[:, None], 0.0)


def sparsemax_rows(z: Tensor) -> Tensor:
    """Row-wise Euclidean projection onto the probability simplex."""
    z = as_tensor(z)
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ShapeError(f"sparsemax_rows: expected a non-empty matrix, got {z.shape}")
    if not np.all(np.isfinite(z.data)):
        raise NonFiniteError("sparsemax_rows: non-finite input")
    out = _sparsemax_np(z.data)
    support = out > 0

    def bw(g):
        n_s = support.sum(axis=1, keepdims=True)
        g_mean = (g * support).sum(axis=1, keepdims=True) / n_s
        return (np.where(support, g - g_mean, 0.0),)

    return _emit("sparsemax_rows", out, (z,), bw)


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor | None = None, same_padding: bool = True) -> Tensor:
    """Cross-correlation along the last axis.

    ``x`` is ``(rows, d)`` or batched ``(B, rows, d)``; ``kernels`` is
    ``(C, rows, K)``.  Each kernel consumes all input rows, giving ``(C, d')``
    (or ``(B, C, d')``).  ``bias`` has shape ``(C,)``.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    batched = x.ndim == 3
    if x.ndim not in (2, 3) or kernels.ndim != 3:
        raise ShapeError(f"conv1d: unsupported shapes {x.shape} and {kernels.shape}")
    xb = x.data if batched else x.data[None]
    C, rows, K = kernels.shape
    d = xb.shape[-1]
    if xb.shape[1] != rows:
        raise ShapeError(f"conv1d: kernel rows {kernels.shape} do not match input {x.shape}")
    if same_padding:
        if K % 2 == 0:
            raise ShapeError(f"conv1d: same padding needs an odd kernel width, got {kernels.shape}")
        pad = (K - 1) // 2
    else:
        if K > d:
            raise ShapeError(f"conv1d: kernel width exceeds input length, {kernels.shape} vs {x.shape}")
        pad = 0
    xp = np.pad(xb, ((0, 0), (0, 0), (pad, pad))) if pad else xb
    B = xb.shape[0]
    win = sliding_window_view(xp, K, axis=2)  # (B, rows, d_out, K)
    d_out = win.shape[2]
    cols = win.transpose(0, 2, 1, 3).reshape(B * d_out, rows * K)
    kmat = kernels.data.reshape(C, rows * K)
    out = (cols @ kmat.T).reshape(B, d_out, C).transpose(0, 2, 1)
    inputs: tuple[Tensor, ...] = (x, kernels)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (C,):
            raise ShapeError(f"conv1d: bias shape {bias.shape} vs {C} kernels")
        out = out + bias.data[None, :, None]
        inputs = (x, kernels, bias)
    out = np.ascontiguousarray(out)

    def bw(g):
        gb = g if batched else g[None]
        gflat = gb.transpose(0, 2, 1).reshape(B * d_out, C)
        gk = (gflat.T @ cols).reshape(C, rows, K)
        gcols = (gflat @ kmat).reshape(B, d_out, rows, K)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, :, k:k + d_out] += gcols[:, :, :, k].transpose(0, 2, 1)
        gx = gxp[:, :, pad:pad + d] if pad else gxp
        if not batched:
            gx = gx[0]
        grads = (gx, gk)
        if bias is not None:
            grads += (gb.sum(axis=(0, 2)),)
        return grads

    return _emit("conv1d", out if batched else out[0], inputs, bw)


BCE_CLAMP = 1e-12


def bce(p: Tensor, y) -> Tensor:
    """Binary cross-entropy, summed over columns and averaged over rows."""
    p = as_tensor(p)
    y = np.asarray(y.data if isinstance(y, Tensor) else y, dtype=p.dtype)
    if p.shape != y.shape:
        raise ShapeError(f"bce: prediction shape {p.shape} vs label shape {y.shape}")
    n = p.shape[0] if p.ndim == 2 else 1
    pc = np.clip(p.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum() / n
    inside = (p.data >= BCE_CLAMP) & (p.data <= 1.0 - BCE_CLAMP)

    def bw(g):
        return (g * inside * (pc - y) / (pc * (1.0 - pc)) / n,)

    return _emit("bce", np.asarray(loss, dtype=p.dtype), (p,), bw)


# -- reverse pass ----------------------------------------------------------------


def backward(tape: Tape, loss: Tensor, params: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to ``params``.

    Parameters the loss does not depend on get zero gradients.  The result is
    also stored on each parameter's ``grad`` attribute.
    """
    params = list(params)
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    if loss.node_id is not None and tape.nodes[loss.node_id].output is loss:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(tape.nodes[: loss.node_id + 1]):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward_fn(g)):
                if not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
    out = []
    for p in params:
        g = grads.get(id(p))
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=p.dtype).reshape(p.shape)
        p.grad = g
        out.append(g)
    return out
