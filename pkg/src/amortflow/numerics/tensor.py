"""A small reverse-mode automatic differentiation engine over numpy arrays.

Every primitive produces a new immutable :class:`Tensor`. When any input
requires a gradient, the output records its parents together with a backward
rule mapping the upstream gradient to one gradient per parent. Calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order and stores gradients on the leaf tensors.

The graph lives only as long as the tensors reference each other, so a fresh
one is built for every training step.
"""

from contextlib import contextmanager

import numpy as np

from amortflow.exceptions import DimensionError, NumericError

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(dtype):
    """Set the floating point type used for new tensors (float64 or float32)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """Dense float array with an optional link into the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, *, _parents=(), _backward=None, op="leaf"):
        arr = np.asarray(data)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    # -- basic properties -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # -- backward pass ----------------------------------------------------

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return multiply(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_over_axis(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_over_axis(self, axis, keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=_DEFAULT_DTYPE))


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _result(data, parents, backward, op):
    # any inf/nan element makes the total non-finite
    if not np.isfinite(np.add.reduce(data, axis=None)):
        raise NumericError(f"non-finite output in op '{op}'", where=op)
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, op=op)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(ufunc, a, b, op):
    try:
        return ufunc(a.data, b.data)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise arithmetic -------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = _binary(np.add, a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(out, (a, b), backward, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = _binary(np.subtract, a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(out, (a, b), backward, "sub")


def multiply(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = _binary(np.multiply, a, b, "multiply")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(out, (a, b), backward, "multiply")


def exp(x):
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return _result(out, (x,), backward, "exp")


def log(x):
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def backward(g):
        return (g / x.data,)

    return _result(out, (x,), backward, "log")


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _result(out, (x,), backward, "tanh")


def arctan(x):
    x = as_tensor(x)

    def backward(g):
        return (g / (1.0 + x.data * x.data),)

    return _result(np.arctan(x.data), (x,), backward, "arctan")


def elu(x):
    """Exponential linear unit: x for x >= 0, exp(x) - 1 otherwise."""
    x = as_tensor(x)
    positive = x.data >= 0
    out = np.where(positive, x.data, np.expm1(np.minimum(x.data, 0.0)))

    def backward(g):
        return (g * np.where(positive, 1.0, out + 1.0),)

    return _result(out, (x,), backward, "elu")


def square(x):
    x = as_tensor(x)

    def backward(g):
        return (2.0 * g * x.data,)

    return _result(x.data * x.data, (x,), backward, "square")


# -- linear algebra ---------------------------------------------------------


def matmul(a, b):
    """``a @ b`` where ``b`` is a matrix and ``a`` has one or more leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    out = a.data @ b.data

    def backward(g):
        ga = g @ b.data.T
        if a.ndim == 1:
            gb = np.outer(a.data, g)
        else:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return _result(out, (a, b), backward, "matmul")


def linear(x, weight, bias):
    """Fused dense layer ``x @ weight + bias``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise DimensionError(
            f"linear: input {x.shape}, weight {weight.shape}, bias {bias.shape} are not aligned"
        )
    out = x.data @ weight.data
    out += bias.data

    def backward(g):
        g2 = g.reshape(-1, weight.shape[1])
        gw = x.data.reshape(-1, weight.shape[0]).T @ g2
        return g @ weight.data.T, gw, g2.sum(axis=0)

    return _result(out, (x, weight, bias), backward, "linear")


# -- structural ops ---------------------------------------------------------


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax
        ):
            raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}")
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(tensors))
        )

    return _result(out, tuple(tensors), backward, "concat")


def slice_(x, key):
    """Basic (non-fancy) indexing, e.g. ``x[:, 2:5]``."""
    x = as_tensor(x)
    try:
        out = x.data[key]
    except IndexError as exc:
        raise DimensionError(f"slice: {exc}") from None

    def backward(g):
        full = np.zeros_like(x.data)
        full[key] = g
        return (full,)

    return _result(np.array(out, copy=True), (x,), backward, "slice")


def take(x, indices, axis=-1):
    """Gather along ``axis``; ``indices`` must be unique (e.g. a permutation)."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)
    ax = axis % x.ndim
    if len(np.unique(indices)) != len(indices):
        raise DimensionError("take: indices must be unique")
    if indices.size and (indices.min() < 0 or indices.max() >= x.shape[ax]):
        raise DimensionError(f"take: index out of range for axis of length {x.shape[ax]}")
    out = np.take(x.data, indices, axis=ax)

    def backward(g):
        full = np.zeros_like(x.data)
        idx = [slice(None)] * x.ndim
        idx[ax] = indices
        full[tuple(idx)] = g
        return (full,)

    return _result(out, (x,), backward, "take")


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: {exc}") from None

    def backward(g):
        return (g.reshape(x.shape),)

    return _result(out, (x,), backward, "reshape")


def broadcast_to(x, shape):
    x = as_tensor(x)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise DimensionError(f"broadcast_to: cannot broadcast {x.shape} to {shape}") from None

    def backward(g):
        return (_unbroadcast(g, x.shape),)

    return _result(np.array(out), (x,), backward, "broadcast_to")


# -- reductions -------------------------------------------------------------


def sum_over_axis(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.asarray(out), (x,), backward, "sum")


def mean_over_axis(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    out = x.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _result(np.asarray(out), (x,), backward, "mean")


# -- convolution ------------------------------------------------------------


def conv1d(x, kernel, stride=1, padding=0):
    """1-D convolution over the time axis.

    Parameters
    ----------
    x : Tensor of shape (batch, time, in_channels)
    kernel : Tensor of shape (width, in_channels, out_channels)
    stride : int
    padding : int
        Zeros added at both ends of the time axis.

    Returns
    -------
    Tensor of shape (batch, out_time, out_channels) with
    ``out_time = (time + 2 * padding - width) // stride + 1``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 3 or x.shape[2] != kernel.shape[1]:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with kernel {kernel.shape}")
    width, c_in, c_out = kernel.shape
    batch, length, _ = x.shape
    padded_len = length + 2 * padding
    if padded_len < width:
        raise DimensionError(f"conv1d: sequence of length {length} shorter than kernel {width}")
    out_len = (padded_len - width) // stride + 1
    xp = np.pad(x.data, ((0, 0), (padding, padding), (0, 0))) if padding else x.data
    span = stride * (out_len - 1) + 1
    cols = np.concatenate([xp[:, j : j + span : stride, :] for j in range(width)], axis=2)
    w2 = kernel.data.reshape(width * c_in, c_out)
    out = cols @ w2

    def backward(g):
        gw = (cols.reshape(-1, width * c_in).T @ g.reshape(-1, c_out)).reshape(kernel.shape)
        gcols = g @ w2.T
        gxp = np.zeros_like(xp)
        for j in range(width):
            gxp[:, j : j + span : stride, :] += gcols[:, :, j * c_in : (j + 1) * c_in]
        gx = gxp[:, padding : padding + length, :] if padding else gxp
        return gx, gw

    return _result(out, (x, kernel), backward, "conv1d")
