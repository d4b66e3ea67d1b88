"""
Dense float64 tensors with define-by-run reverse-mode differentiation.

Every operation executed while a :class:`Tape` is active, on at least one input that
requires gradients, is appended to that tape as a :class:`Node` holding its inputs,
its output and a vector-Jacobian rule. :func:`backward` walks the nodes in reverse
recording order, which is a reverse topological order of the computation.

Broadcasting is deliberately limited: binary operations need equal shapes, except
that either operand may be a 0-d scalar. Every operation checks its result for
non-finite values and raises :class:`NonFiniteError` instead of propagating them.

Examples
--------
>>> x = Tensor([3.0], requires_grad=True)
>>> with Tape() as tape:
...     loss = (x * x).sum()
>>> backward(loss, tape)
>>> x.grad
array([6.])
"""
from contextlib import contextmanager
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Node:
    """One recorded primitive application."""

    __slots__ = ("op", "inputs", "output", "vjp")

    def __init__(self, op: str, inputs: Tuple["Tensor", ...], output: "Tensor", vjp: Callable):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.vjp = vjp

    def __repr__(self):
        return f"Node({self.op}, out={self.output.shape})"


class Tape:
    """An ordered record of the differentiable operations of one step.

    Use as a context manager; tapes nest, and the innermost one records.
    """

    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss: "Tensor"):
        backward(loss, self)


_TAPES: List[Optional[Tape]] = []


def active_tape() -> Optional[Tape]:
    return _TAPES[-1] if _TAPES else None


@contextmanager
def no_grad():
    """Suspend recording; operations inside produce constants."""
    _TAPES.append(None)
    try:
        yield
    finally:
        _TAPES.pop()


def _check_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by {what}")


class Tensor:
    """A dense array of 64-bit reals with an optional gradient slot."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = arr
        out.grad = None
        out.requires_grad = requires_grad
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4)}{flag})"

    def __len__(self):
        return self.shape[0]

    # Operator sugar ---------------------------------------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by a python scalar")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def max(self, axis=0):
        return tmax(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def softmax(self, axis=-1):
        return softmax(self, axis)

    def log_softmax(self, axis=-1):
        return log_softmax(self, axis)


Operand = Union[Tensor, float, int, np.ndarray]


def as_tensor(x: Operand) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], vjp: Callable) -> Tensor:
    _check_finite(data, op)
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, track)
    if track:
        tape.nodes.append(Node(op, inputs, out, vjp))
    return out


def _binary_operands(a: Operand, b: Operand, op: str) -> Tuple[Tensor, Tensor]:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} differ (only 0-d scalars broadcast)"
        )
    return a, b


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


# Binary ---------------------------------------------------------------------
def add(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make("add", a.data + b.data, (a, b), vjp)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make("sub", a.data - b.data, (a, b), vjp)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _binary_operands(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make("mul", a.data * b.data, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes.

    ``a[..., m, k] @ b[..., k, n]``: leading (batch) axes must be equal, unless ``b``
    is a plain ``k×n`` matrix shared by every batch entry.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of at least 2 dims, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: batch dimensions differ, {a.shape} x {b.shape}")

    def vjp(g):
        if b.ndim == 2:
            k, n = b.shape
            return g @ b.data.T, a.data.reshape(-1, k).T @ g.reshape(-1, n)
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return _make("matmul", a.data @ b.data, (a, b), vjp)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``weight·x + bias`` applied along the last axis of ``x[..., in]``."""
    x = as_tensor(x)
    out_dim, in_dim = weight.shape
    if x.ndim < 1 or x.shape[-1] != in_dim:
        raise ShapeError(f"affine: input {x.shape} does not match weight {weight.shape}")
    if bias.shape != (out_dim,):
        raise ShapeError(f"affine: bias {bias.shape} does not match weight {weight.shape}")

    def vjp(g):
        rows = g.reshape(-1, out_dim)
        return g @ weight.data, rows.T @ x.data.reshape(-1, in_dim), rows.sum(axis=0)

    return _make("affine", x.data @ weight.data.T + bias.data, (x, weight, bias), vjp)


def where(mask, a: Operand, b: Operand) -> Tensor:
    """
    Take ``a`` where ``mask`` holds and ``b`` elsewhere.

    ``mask`` is a boolean array covering the leading axes of ``a`` (for example one
    flag per row) and is broadcast over the remaining ones.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"where: shapes {a.shape} and {b.shape} differ")
    mask = np.asarray(mask, dtype=bool)
    if a.shape[: mask.ndim] != mask.shape:
        raise ShapeError(f"where: mask {mask.shape} does not lead {a.shape}")
    full = mask.reshape(mask.shape + (1,) * (a.ndim - mask.ndim))

    def vjp(g):
        return np.where(full, g, 0.0), np.where(full, 0.0, g)

    return _make("where", np.where(full, a.data, b.data), (a, b), vjp)


def maximum(a: Operand, b: Operand) -> Tensor:
    """Elementwise maximum; ties send the gradient to ``a``."""
    a, b = _binary_operands(a, b, "maximum")
    if a.shape != b.shape:
        raise ShapeError(f"maximum: shapes {a.shape} and {b.shape} differ")
    return where(a.data >= b.data, a, b)


# Unary elementwise -----------------------------------------------------------
def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    y = special.expit(x.data)
    return _make("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _make("exp", y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ValueError("log of a non-positive value")
    return _make("log", np.log(x.data), (x,), lambda g: (g / x.data,))


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "exp": exp,
    "log": log,
}


def elementwise(op: str, *inputs: Operand) -> Tensor:
    """Apply a named pointwise operation (``add``, ``sub``, ``mul``, ``tanh``, ...)."""
    try:
        fnc = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op '{op}'. Available: {tuple(_ELEMENTWISE)}")
    return fnc(*inputs)


# Normalisations ---------------------------------------------------------------
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` (max-subtracted)."""
    if x.size == 0:
        raise ShapeError("softmax of an empty tensor")
    y = special.softmax(x.data, axis=axis)

    def vjp(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _make("softmax", y, (x,), vjp)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    y = special.log_softmax(x.data, axis=axis)

    def vjp(g):
        return (g - np.exp(y) * np.sum(g, axis=axis, keepdims=True),)

    return _make("log_softmax", y, (x,), vjp)


def cross_entropy(logits: Tensor, label: Union[int, Sequence[int]]) -> Tensor:
    """
    ``-log softmax(logits)[label]`` for a single vector of class logits.

    For a ``B × C`` batch of logits, ``label`` holds one class per row and the result
    is the mean over rows.
    """
    if logits.ndim == 2:
        return _batch_cross_entropy(logits, label)
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy expects logit vectors, got {logits.shape}")
    n_classes = logits.shape[0]
    if not 0 <= label < n_classes:
        raise ValueError(f"label {label} out of range for {n_classes} classes")
    logp = special.log_softmax(logits.data)

    def vjp(g):
        grad = np.exp(logp)
        grad[label] -= 1.0
        return (g * grad,)

    return _make("cross_entropy", np.asarray(-logp[label]), (logits,), vjp)


def _batch_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    n_rows, n_classes = logits.shape
    labels = np.asarray(labels, dtype=np.intp)
    if labels.shape != (n_rows,):
        raise ShapeError(f"cross_entropy: {n_rows} logit rows but labels of shape {labels.shape}")
    if np.any((labels < 0) | (labels >= n_classes)):
        raise ValueError(f"labels {labels} out of range for {n_classes} classes")
    logp = special.log_softmax(logits.data, axis=-1)
    rows = np.arange(n_rows)

    def vjp(g):
        grad = np.exp(logp)
        grad[rows, labels] -= 1.0
        return (g * grad / n_rows,)

    return _make("cross_entropy", np.asarray(-logp[rows, labels].mean()), (logits,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale by ``gain`` and shift by ``bias``."""
    dim = x.shape[-1]
    if gain.shape != (dim,) or bias.shape != (dim,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({dim},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(x.data.var(axis=-1, keepdims=True) + eps)
    xhat = (x.data - mu) * inv

    def vjp(g):
        reduce = tuple(range(g.ndim - 1))
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=reduce), g.sum(axis=reduce)

    return _make("layer_norm", xhat * gain.data + bias.data, (x, gain, bias), vjp)


# Reductions -------------------------------------------------------------------
def _expand(g: np.ndarray, shape, axis) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    return np.broadcast_to(np.expand_dims(g, axis), shape)


def tsum(x: Tensor, axis: Optional[int] = None) -> Tensor:
    return _make(
        "sum", np.asarray(x.data.sum(axis=axis)), (x,), lambda g: (_expand(g, x.shape, axis),)
    )


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return _make(
        "mean",
        np.asarray(x.data.mean(axis=axis)),
        (x,),
        lambda g: (_expand(g, x.shape, axis) / n,),
    )


def tmax(x: Tensor, axis: int = 0) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    idx = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    y = np.take_along_axis(x.data, idx, axis=axis).squeeze(axis)

    def vjp(g):
        grad = np.zeros_like(x.data)
        np.put_along_axis(grad, idx, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _make("max", y, (x,), vjp)


# Structure ---------------------------------------------------------------------
def reshape(x: Tensor, shape) -> Tensor:
    return _make("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose needs a 2-d tensor, got {x.shape}")
    return _make("transpose", x.data.T, (x,), lambda g: (g.T,))


def swapaxes(x: Tensor, axis1: int = -2, axis2: int = -1) -> Tensor:
    if x.ndim < 2:
        raise ShapeError(f"swapaxes needs at least 2 dims, got {x.shape}")
    return _make(
        "swapaxes",
        np.swapaxes(x.data, axis1, axis2),
        (x,),
        lambda g: (np.swapaxes(g, axis1, axis2),),
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ShapeError("concat of no tensors")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ShapeError("stack of no tensors")
    if len({t.shape for t in tensors}) != 1:
        raise ShapeError(f"stack: shapes differ {[t.shape for t in tensors]}")

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make("stack", np.stack([t.data for t in tensors], axis=axis), tensors, vjp)


def narrow(x: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """The slice ``[start, stop)`` of ``x`` along ``axis``."""
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def vjp(g):
        grad = np.zeros_like(x.data)
        grad[index] = g
        return (grad,)

    return _make("narrow", x.data[index], (x,), vjp)


def take(x: Tensor, indices: Sequence[int], axis: int = 0) -> Tensor:
    """Select entries of ``x`` along ``axis`` (repeats allowed)."""
    indices = np.asarray(indices, dtype=np.intp)

    def vjp(g):
        grad = np.zeros_like(x.data)
        np.add.at(np.moveaxis(grad, axis, 0), indices, np.moveaxis(g, axis, 0))
        return (grad,)

    return _make("take", np.take(x.data, indices, axis=axis), (x,), vjp)


def gather(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Pick ``x[b, indices[b]]`` from each row of a 2-d tensor."""
    indices = np.asarray(indices, dtype=np.intp)
    if x.ndim != 2 or indices.shape != (x.shape[0],):
        raise ShapeError(f"gather: {x.shape} rows vs {indices.shape} indices")
    rows = np.arange(x.shape[0])

    def vjp(g):
        grad = np.zeros_like(x.data)
        grad[rows, indices] = g
        return (grad,)

    return _make("gather", x.data[rows, indices], (x,), vjp)


def detach(x: Tensor) -> Tensor:
    return x.detach()


# Backward -----------------------------------------------------------------------
def backward(loss: Tensor, tape: Tape):
    """Accumulate ``d loss / d t`` into ``t.grad`` for every recorded tensor ``t``.

    Gradients add to whatever is already stored, so two passes over two losses sum
    to one pass over their sum.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    seed = np.ones_like(loss.data)
    loss.grad = seed if loss.grad is None else loss.grad + seed

    for node in reversed(tape.nodes):
        g = node.output.grad
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            _check_finite(gi, f"the gradient of {node.op}")
            inp.grad = gi if inp.grad is None else inp.grad + gi
