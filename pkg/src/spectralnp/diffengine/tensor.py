"""Reverse-mode differentiation over dense float64 arrays.

A ``Tape`` records primitive applications in creation order, which is a
valid topological order of the computation DAG, so ``Tape.backward`` can
walk the records in reverse and apply each primitive's analytic
vector-Jacobian product.  Gradients accumulate with ``+=`` across fan-out.
Everything is float64; the property and acceptance tolerances (1e-9
equivariance, 1e-4 end-to-end gradients) are not reachable in 32-bit.

Tensors are cheap wrappers around ``numpy`` arrays.  A tensor created with
``requires_grad=True``, or produced by an op with at least one
grad-requiring input, carries the tape forward.  Ops whose inputs are all
constants do not record anything, so the same code path doubles as a plain
numpy evaluator.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

__all__ = [
    "Tape",
    "Tensor",
    "constant",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "tsum",
    "tmean",
    "broadcast_to",
    "concat",
    "reshape",
    "transpose",
    "take_slice",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "square",
    "relu",
    "clip_min",
    "softplus",
    "atan2",
    "softmax",
    "layernorm",
    "masked_fill",
    "stack_last",
]


class _Node:
    """One recorded primitive: output, inputs, and the VJP closure."""

    __slots__ = ("out", "inputs", "vjp")

    def __init__(self, out, inputs, vjp):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Append-only record of primitives in creation (= topological) order."""

    def __init__(self):
        self._nodes: list[_Node] = []

    def __len__(self):
        return len(self._nodes)

    def _record(self, out, inputs, vjp):
        self._nodes.append(_Node(out, inputs, vjp))

    def backward(self, loss: "Tensor") -> None:
        """Populate ``.grad`` on every grad-requiring tensor reachable from loss.

        ``loss`` must be a scalar recorded on this tape.  Visits nodes in
        exact reverse creation order; accumulation order is therefore
        deterministic and identical tapes give bitwise identical gradients.
        """
        if loss.tape is not self:
            raise ValueError("loss tensor does not belong to this tape")
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self._nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            if node.out.grad_retained:
                node.out.grad = g
            for inp, gin in zip(node.inputs, node.vjp(g)):
                if gin is None or not inp.requires_grad:
                    continue
                acc = grads.get(id(inp))
                if acc is None:
                    # Own the accumulator: vjps may hand back views or the
                    # upstream gradient itself, shared between inputs.
                    grads[id(inp)] = np.array(gin)
                else:
                    acc += gin
        for node in self._nodes:
            for inp in node.inputs:
                if inp.requires_grad and inp.is_leaf and id(inp) in grads:
                    inp.grad = grads.pop(id(inp))


class Tensor:
    """A float64 array plus tape bookkeeping.

    Treat ``data`` as immutable once wrapped: primitives never mutate their
    inputs, and sharing tensors across threads is safe.
    """

    __slots__ = ("data", "requires_grad", "tape", "grad", "is_leaf", "grad_retained")

    def __init__(self, data, requires_grad: bool = False, tape: Tape | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.tape = tape
        self.grad: np.ndarray | None = None
        self.is_leaf = True
        self.grad_retained = False
        if self.requires_grad and tape is None:
            raise ValueError("grad-requiring leaf tensors must be attached to a tape")

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def retain_grad(self):
        self.grad_retained = True
        return self

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; all defined in terms of the module primitives
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take_slice(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)


def constant(data) -> Tensor:
    """Wrap data as a non-differentiable tensor."""
    return Tensor(data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, inputs, vjp) -> Tensor:
    """Create the op output, recording on the inputs' tape if needed."""
    requires = any(t.requires_grad for t in inputs)
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ValueError("cannot mix tensors from different tapes")
            tape = t.tape
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = requires
    out.tape = tape if requires else None
    out.grad = None
    out.is_leaf = False
    out.grad_retained = False
    if requires:
        if tape is None:
            raise ValueError("grad-requiring op inputs carry no tape")
        tape._record(out, inputs, vjp)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a, b, opname):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _result(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _result(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _result(out, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "div")
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _result(out, (a, b), vjp)


def matmul(a, b) -> Tensor:
    """numpy matmul semantics for stacks of matrices (operands must be >= 2-D)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _result(out, (a, b), vjp)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape),)

    return _result(np.asarray(out), (a,), vjp)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / n, a.data.shape),)

    return _result(np.asarray(out), (a,), vjp)


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = np.broadcast_to(a.data, shape).copy()

    def vjp(g):
        return (_unbroadcast(g, a.data.shape),)

    return _result(out, (a,), vjp)


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(out, tuple(tensors), vjp)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _result(out, (a,), vjp)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def vjp(g):
        return (np.transpose(g, inverse),)

    return _result(out, (a,), vjp)


def take_slice(a, key) -> Tensor:
    """Basic (non-advanced) indexing; gradient scatters into zeros."""
    a = _as_tensor(a)
    out = a.data[key]
    if out.base is not None:
        out = out.copy()

    def vjp(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _result(out, (a,), vjp)


def sin(a) -> Tensor:
    a = _as_tensor(a)
    out = np.sin(a.data)

    def vjp(g):
        return (g * np.cos(a.data),)

    return _result(out, (a,), vjp)


def cos(a) -> Tensor:
    a = _as_tensor(a)
    out = np.cos(a.data)

    def vjp(g):
        return (-g * np.sin(a.data),)

    return _result(out, (a,), vjp)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)

    def vjp(g):
        return (g * out,)

    return _result(out, (a,), vjp)


def log(a) -> Tensor:
    a = _as_tensor(a)
    out = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _result(out, (a,), vjp)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out = np.sqrt(a.data)

    def vjp(g):
        return (g * (0.5 / out),)

    return _result(out, (a,), vjp)


def square(a) -> Tensor:
    a = _as_tensor(a)
    out = a.data * a.data

    def vjp(g):
        return (g * (2.0 * a.data),)

    return _result(out, (a,), vjp)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _result(out, (a,), vjp)


def clip_min(a, floor: float) -> Tensor:
    """max(a, floor) elementwise; subgradient 0 where the floor is active."""
    a = _as_tensor(a)
    out = np.maximum(a.data, floor)

    def vjp(g):
        return (g * (a.data > floor),)

    return _result(out, (a,), vjp)


def softplus(a) -> Tensor:
    """log(1 + exp(a)), computed without overflow."""
    a = _as_tensor(a)
    out = np.logaddexp(0.0, a.data)

    def vjp(g):
        # derivative is the logistic sigmoid, evaluated stably
        ea = np.exp(-np.abs(a.data))
        sig = np.where(a.data >= 0, 1.0 / (1.0 + ea), ea / (1.0 + ea))
        return (g * sig,)

    return _result(out, (a,), vjp)


def atan2(b, a) -> Tensor:
    """Four-quadrant arctangent atan2(b, a), range (-pi, pi]."""
    b, a = _as_tensor(b), _as_tensor(a)
    _check_broadcast(b.data, a.data, "atan2")
    out = np.arctan2(b.data, a.data)

    def vjp(g):
        denom = a.data * a.data + b.data * b.data
        gb = _unbroadcast(g * a.data / denom, b.data.shape)
        ga = _unbroadcast(-g * b.data / denom, a.data.shape)
        return gb, ga

    return _result(out, (b, a), vjp)


def softmax(a, axis: int = -1) -> Tensor:
    """Shift-stabilised softmax along `axis`."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _result(out, (a,), vjp)


def layernorm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    n = x.data.shape[-1]

    def vjp(g):
        gxhat = g * gamma.data
        gvar_term = (gxhat * xhat).mean(axis=-1, keepdims=True)
        gmu_term = gxhat.mean(axis=-1, keepdims=True)
        gx = inv * (gxhat - gmu_term - xhat * gvar_term)
        ggamma = _unbroadcast(g * xhat, gamma.data.shape)
        gbeta = _unbroadcast(g, beta.data.shape)
        return gx, ggamma, gbeta

    return _result(out, (x, gamma, beta), vjp)


def masked_fill(a, mask, value: float) -> Tensor:
    """Replace entries where `mask` is True by `value`; gradient passes elsewhere."""
    a = _as_tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.data.shape)
    out = np.where(mask, value, a.data)

    def vjp(g):
        return (np.where(mask, 0.0, g),)

    return _result(out, (a,), vjp)


def stack_last(tensors) -> Tensor:
    """Stack along a new trailing axis (composite of reshape + concat)."""
    expanded = [reshape(t, t.shape + (1,)) for t in (_as_tensor(t) for t in tensors)]
    return concat(expanded, axis=-1)
