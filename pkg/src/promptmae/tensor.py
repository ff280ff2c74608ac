"""Dense tensors with reverse-mode automatic differentiation.

Each Tensor owns a row-major numpy array; ops copy rather than alias
(no strided views). Gradients flow through backward closures collected
on a tape and replayed in reverse topological order, so any composition
of the ops below is differentiable end to end.

float64 is the default dtype so tests can pin tight tolerances; call
set_default_dtype(np.float32) to trade precision for training speed.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, DimensionError

_default_dtype = np.float64

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def set_default_dtype(dtype) -> None:
    global _default_dtype
    if dtype not in (np.float32, np.float64):
        raise ContractError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _default_dtype = dtype


def get_default_dtype():
    return _default_dtype


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """n-dimensional value with optional participation in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=_default_dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward: Callable[[np.ndarray], None] | None = None
        self._parents: tuple[Tensor, ...] = ()
        self.name = name

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple["Tensor", ...],
                backward: Callable[[np.ndarray], None]) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        # constants drop their tape so inference builds no graph
        out._parents = parents if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        out.name = None
        return out

    # -- basics -------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable trainable leaf."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError("backward() without a seed requires a scalar output")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:  # iterative DFS; training graphs can outgrow the recursion limit
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ----------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data + other.data

        def _bw(g, a=self, b=other):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._result(data, (self, other), _bw)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data - other.data

        def _bw(g, a=self, b=other):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(-g, b.shape))

        return Tensor._result(data, (self, other), _bw)

    def __rsub__(self, other) -> "Tensor":
        return self._coerce(other).__sub__(self)

    def __neg__(self) -> "Tensor":
        def _bw(g, a=self):
            a._accumulate(-g)

        return Tensor._result(-self.data, (self,), _bw)

    def __mul__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data * other.data

        def _bw(g, a=self, b=other):
            a._accumulate(_unbroadcast(g * b.data, a.shape))
            b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._result(data, (self, other), _bw)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data / other.data

        def _bw(g, a=self, b=other):
            a._accumulate(_unbroadcast(g / b.data, a.shape))
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._result(data, (self, other), _bw)

    def __rtruediv__(self, other) -> "Tensor":
        return self._coerce(other).__truediv__(self)

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise ContractError("only scalar exponents are supported")
        c = float(exponent)
        data = self.data ** c

        def _bw(g, a=self, c=c):
            a._accumulate(g * c * a.data ** (c - 1.0))

        return Tensor._result(data, (self,), _bw)

    def exp(self) -> "Tensor":
        data = np.exp(self.data)

        def _bw(g, a=self, y=data):
            a._accumulate(g * y)

        return Tensor._result(data, (self,), _bw)

    def log(self) -> "Tensor":
        data = np.log(self.data)

        def _bw(g, a=self):
            a._accumulate(g / a.data)

        return Tensor._result(data, (self,), _bw)

    def gelu(self) -> "Tensor":
        x = self.data
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
        data = x * cdf

        def _bw(g, a=self, x=x, cdf=cdf):
            pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
            a._accumulate(g * (cdf + x * pdf))

        return Tensor._result(data, (self,), _bw)

    # -- shape manipulation ---------------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        data = self.data.reshape(shape).copy()

        def _bw(g, a=self):
            a._accumulate(g.reshape(a.shape))

        return Tensor._result(data, (self,), _bw)

    def transpose(self, axes: Sequence[int]) -> "Tensor":
        axes = tuple(axes)
        data = np.transpose(self.data, axes).copy()
        inverse = tuple(np.argsort(axes))

        def _bw(g, a=self, inverse=inverse):
            a._accumulate(np.transpose(g, inverse))

        return Tensor._result(data, (self,), _bw)

    def swap_last2(self) -> "Tensor":
        if self.ndim < 2:
            raise DimensionError(f"swap_last2 needs ndim >= 2, got shape {self.shape}")
        axes = tuple(range(self.ndim - 2)) + (self.ndim - 1, self.ndim - 2)
        return self.transpose(axes)

    def broadcast_to(self, shape: Sequence[int]) -> "Tensor":
        shape = tuple(shape)
        data = np.broadcast_to(self.data, shape).copy()

        def _bw(g, a=self):
            a._accumulate(_unbroadcast(g, a.shape))

        return Tensor._result(data, (self,), _bw)

    def take(self, indices: Sequence[int], axis: int) -> "Tensor":
        """Gather along one axis by integer index list (explicit copy)."""
        idx = np.asarray(indices, dtype=np.intp)
        data = np.take(self.data, idx, axis=axis)

        def _bw(g, a=self, idx=idx, axis=axis):
            full = np.zeros_like(a.data)
            sl: list = [slice(None)] * a.data.ndim
            sl[axis] = idx
            np.add.at(full, tuple(sl), g)
            a._accumulate(full)

        return Tensor._result(data, (self,), _bw)

    # -- reductions ------------------------------------------------------------

    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def _bw(g, a=self, axis=axis, keepdims=keepdims):
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.shape).copy())
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(g, a.shape).copy())

        return Tensor._result(np.asarray(data), (self,), _bw)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- linear algebra ----------------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading axes."""
    a = Tensor._coerce(a)
    b = Tensor._coerce(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul needs matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    data = np.matmul(a.data, b.data)

    def _bw(g, a=a, b=b):
        a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return Tensor._result(data, (a, b), _bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an axis; backward splits the incoming gradient."""
    tensors = tuple(tensors)
    if not tensors:
        raise ContractError("concat of an empty sequence")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def _bw(g, tensors=tensors, sizes=sizes, axis=axis):
        start = 0
        for t, size in zip(tensors, sizes):
            sl: list = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + size)
            t._accumulate(g[tuple(sl)])
            start += size

    return Tensor._result(data, tensors, _bw)


def softmax_lastdim(x: Tensor) -> Tensor:
    """Row-stochastic softmax over the last axis, max-shifted for stability."""
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax needs a non-empty last dimension, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def _bw(g, x=x, y=y):
        inner = (g * y).sum(axis=-1, keepdims=True)
        x._accumulate(y * (g - inner))

    return Tensor._result(y, (x,), _bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return centered * inv * gain + bias


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when p == 0 or no generator is supplied."""
    if p <= 0.0 or rng is None:
        return x
    if p >= 1.0:
        raise ContractError(f"dropout rate must be < 1, got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return x * Tensor(keep)


def grad_check_params(f: Callable[[], Tensor], params: Sequence[Tensor],
                      h: float = 1e-5) -> float:
    """Compare backward() of the scalar f() against central differences.

    Returns the max over all coordinates of all trainable params of
    |analytic - numeric| / (|analytic| + |numeric| + 1e-8). Frozen leaves
    are skipped: they carry no gradient by contract.
    """
    params = [p for p in params if p.requires_grad]
    if not params:
        raise ContractError("grad_check needs at least one trainable leaf")
    out = f()
    if out.data.size != 1:
        raise ContractError("grad_check needs a scalar-valued function")
    for p in params:
        p.grad = None
    out.backward()
    worst = 0.0
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(f().data)
            flat[i] = orig - h
            lo = float(f().data)
            flat[i] = orig
            numeric[i] = (hi - lo) / (2.0 * h)
        numeric = numeric.reshape(p.data.shape)
        rel = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-8)
        worst = max(worst, float(rel.max()))
    return worst


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """grad_check_params for a single-argument scalar function."""
    return grad_check_params(lambda: f(x), [x], h=h)
