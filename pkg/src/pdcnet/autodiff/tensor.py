"""Dense tensor with a reverse-mode autodiff tape.

Every differentiable operation records a :class:`Node` on its output holding
the input tensors and a closure that maps the output gradient to one gradient
per input. :meth:`Tensor.backward` walks the recorded graph once in reverse
topological order and accumulates gradients into leaf tensors.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError

DTYPES = {"f32": np.dtype(np.float32), "f64": np.dtype(np.float64), "u8": np.dtype(np.uint8)}
_TAGS = {v: k for k, v in DTYPES.items()}

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


def _coerce(data, dtype=None) -> np.ndarray:
    if isinstance(data, Tensor):
        data = data.data
    if dtype is not None:
        # asarray keeps 0-d inputs 0-d; ascontiguousarray would promote them to (1,)
        return np.asarray(data, dtype=DTYPES.get(dtype, dtype), order="C")
    arr = np.asarray(data)
    if arr.dtype in _TAGS:
        return np.asarray(arr, order="C")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if arr.dtype == np.float16:
        return arr.astype(np.float32)
    return arr.astype(np.float64)


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    saved: dict = field(default_factory=dict)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        self.data = _coerce(data, dtype)
        if requires_grad and self.data.dtype == np.uint8:
            raise TypeError("u8 tensors cannot carry gradients")
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self.name = name

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> str:
        return _TAGS[self.data.dtype]

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def astype(self, dtype: str) -> "Tensor":
        return Tensor(self.data.astype(DTYPES[dtype]), requires_grad=self.requires_grad and dtype != "u8")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{rg})"

    def __len__(self) -> int:
        return len(self.data)

    # -- graph traversal ----------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Populate ``.grad`` of every reachable leaf with d(self)/d(leaf)."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for t in order:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t.node is None:
                if t.requires_grad:
                    t.grad = g.copy() if t.grad is None else t.grad + g
                continue
            in_grads = t.node.backward(g)
            for inp, ig in zip(t.node.inputs, in_grads):
                if ig is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + ig
                else:
                    grads[key] = ig

    # -- operators -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return reduce_max(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _topo_order(root: Tensor) -> list:
    """Reverse topological order (root first), iterative to survive deep graphs."""
    visited = set()
    post: list = []
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            post.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for inp in t.node.inputs:
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))
    post.reverse()
    return post


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _const(x, like: np.ndarray) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype if like.dtype != np.uint8 else np.float64))


def make_result(data: np.ndarray, inputs: Sequence[Tensor], op: str, backward, **saved) -> Tensor:
    """Wrap ``data`` and record a node when any input needs a gradient."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.node = None
    out.requires_grad = False
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, tuple(inputs), backward, saved)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise DimensionError(f"shapes {a} and {b} are not broadcast-compatible") from None


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else _const(a, as_tensor(b).data)
    b = _const(b, a.data)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(g, sb)

    return make_result(a.data + b.data, (a, b), "add", backward)


def sub(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else _const(a, as_tensor(b).data)
    b = _const(b, a.data)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(-g, sb)

    return make_result(a.data - b.data, (a, b), "sub", backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else _const(a, as_tensor(b).data)
    b = _const(b, a.data)
    _broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result(ad * bd, (a, b), "mul", backward)


def div(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else _const(a, as_tensor(b).data)
    b = _const(b, a.data)
    _broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        ga = unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result(out, (a, b), "div", backward)


def power(a: Tensor, exponent: float) -> Tensor:
    ad = a.data

    def backward(g):
        return (g * exponent * ad ** (exponent - 1),)

    return make_result(ad**exponent, (a,), "pow", backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, (a,), "exp", lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return make_result(np.log(ad), (a,), "log", lambda g: (g / ad,))


# -- reductions ------------------------------------------------------------

def _norm_axes(axis, ndim: int) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def reduce_sum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).copy(),)

    return make_result(np.asarray(a.data.sum(axis=axes, keepdims=keepdims)), (a,), "sum", backward)


def reduce_mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    return reduce_sum(a, axes, keepdims) * (1.0 / count)


def reduce_max(a: Tensor, axis=None, keepdims=False) -> Tensor:
    """Max over ``axis``; gradient goes to the first maximal element (row-major)."""
    axes = _norm_axes(axis, a.ndim)
    keep = tuple(i for i in range(a.ndim) if i not in axes)
    moved = np.transpose(a.data, keep + axes)
    kept_shape = moved.shape[: len(keep)]
    flat = moved.reshape(kept_shape + (-1,))
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    if keepdims:
        out = np.expand_dims(out, axes)
    inv = np.argsort(keep + axes)

    def backward(g):
        if keepdims:
            g = np.squeeze(g, axis=axes)
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[..., None], g[..., None], axis=-1)
        return (np.transpose(gflat.reshape(moved.shape), inv),)

    return make_result(np.asarray(out, order="C"), (a,), "max", backward)


# -- shape manipulation ----------------------------------------------------

def reshape(a: Tensor, shape: tuple) -> Tensor:
    src = a.shape
    return make_result(a.data.reshape(shape), (a,), "reshape", lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes=None) -> Tensor:
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_result(
        np.ascontiguousarray(np.transpose(a.data, axes)),
        (a,),
        "transpose",
        lambda g: (np.transpose(g, inv),),
    )


def getitem(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.data.dtype

    def backward(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, g) if _has_array_index(index) else out.__setitem__(index, g)
        return (out,)

    return make_result(np.asarray(a.data[index], order="C"), (a,), "getitem", backward)


def _has_array_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def pad(a: Tensor, widths: Sequence[tuple]) -> Tensor:
    """Zero padding; ``widths`` holds one (before, after) pair per axis."""
    widths = tuple(tuple(w) for w in widths)
    sl = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return make_result(np.pad(a.data, widths), (a,), "pad", lambda g: (g[sl],))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat of an empty sequence")
    nd = tensors[0].ndim
    axis = axis % nd
    ref = tensors[0].shape
    for i, t in enumerate(tensors):
        if t.ndim != nd or any(t.shape[k] != ref[k] for k in range(nd) if k != axis):
            raise DimensionError(f"concat input {i} has shape {t.shape}, expected {ref} off axis {axis}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(
            np.ascontiguousarray(np.take(g, np.arange(lo, hi), axis=axis)) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat", backward)


def split(a: Tensor, parts: int, axis: int = 0) -> list:
    axis = axis % a.ndim
    n = a.shape[axis]
    if parts <= 0 or n % parts:
        raise DimensionError(f"cannot split axis {axis} of size {n} into {parts} equal parts")
    step = n // parts
    out = []
    for i in range(parts):
        index = [slice(None)] * a.ndim
        index[axis] = slice(i * step, (i + 1) * step)
        out.append(getitem(a, tuple(index)))
    return out


# -- linear algebra --------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shapes {a.shape} @ {b.shape}: inner axes differ")
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result(ad @ bd, (a, b), "matmul", backward)
