from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from mataformer.errors import ShapeError

#: dtype used when a tensor is built from python scalars or integer arrays
DEFAULT_DTYPE = np.float64

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording, e.g. for evaluation and finite differences"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def _noop() -> None:
    return None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Sum over the axes that broadcasting added or stretched
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _is_basic_index(index) -> bool:
    # Basic indexing never repeats an element, so plain assignment is exact
    parts = index if isinstance(index, tuple) else (index,)
    return all(
        isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis
        for p in parts
    )


def _as_array(data: ArrayLike, dtype=None) -> np.ndarray:
    if isinstance(data, Tensor):
        data = data.data
    arr = np.asarray(data, dtype=dtype)
    if dtype is None and arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    """Tensor is a dense float array that records the operations producing it.

    Calling ``backward`` on a scalar result walks the recorded graph in reverse
    topological order and accumulates ``grad`` (same shape as ``data``) on every
    tensor created with ``requires_grad=True``.
    """

    # Make ``ndarray <op> Tensor`` dispatch to the Tensor reflected operators
    __array_priority__ = 100

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype=None,
        _parents: tuple["Tensor", ...] = (),
        _op: str = "",
    ):
        self.data: np.ndarray = _as_array(data, dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._op = _op
        self._backward: Callable[[], None] = _noop

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item", "a single element", self.shape)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # *** graph plumbing ***

    def _child(self, data: np.ndarray, parents: tuple["Tensor", ...], op: str) -> "Tensor":
        track = _grad_enabled and any(p.requires_grad for p in parents)
        return Tensor(
            data,
            requires_grad=track,
            _parents=parents if track else (),
            _op=op,
        )

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(grad, self.shape)
        self.grad = grad if self.grad is None else self.grad + grad

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        if not self.requires_grad:
            raise RuntimeError("backward called on a tensor that does not require grad")

        if grad is None:
            if self.size != 1:
                raise ShapeError("implicit backward seed", "a single element", self.shape)
            seed = np.ones_like(self.data)
        else:
            seed = _as_array(grad, self.dtype)
            if seed.shape != self.data.shape:
                raise ShapeError("backward seed", self.shape, seed.shape)

        self.grad = seed if self.grad is None else self.grad + seed
        for node in reversed(self._topological_order()):
            if node.grad is not None:
                node._backward()

    # *** binary arithmetic ***

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other, self.dtype)
        out = self._child(self.data + other.data, (self, other), "add")

        def _backward():
            self._accumulate(out.grad)
            other._accumulate(out.grad)

        out._backward = _backward
        return out

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return self + other

    def __neg__(self) -> "Tensor":
        out = self._child(-self.data, (self,), "neg")

        def _backward():
            self._accumulate(-out.grad)

        out._backward = _backward
        return out

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-as_tensor(other, self.dtype))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other, self.dtype) + (-self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other, self.dtype)
        out = self._child(self.data * other.data, (self, other), "mul")

        def _backward():
            self._accumulate(out.grad * other.data)
            other._accumulate(out.grad * self.data)

        out._backward = _backward
        return out

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self * other

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other, self.dtype)
        out = self._child(self.data / other.data, (self, other), "div")

        def _backward():
            self._accumulate(out.grad / other.data)
            other._accumulate(-out.grad * self.data / (other.data * other.data))

        out._backward = _backward
        return out

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other, self.dtype) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("only scalar exponents are supported")
        out = self._child(self.data**exponent, (self,), "pow")

        def _backward():
            self._accumulate(out.grad * exponent * self.data ** (exponent - 1))

        out._backward = _backward
        return out

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other, self.dtype)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError("matmul operands", "ndim >= 2", (self.shape, other.shape))
        if self.shape[-1] != other.shape[-2]:
            raise ShapeError("matmul inner dimension", self.shape[-1], other.shape[-2])
        out = self._child(np.matmul(self.data, other.data), (self, other), "matmul")

        def _backward():
            self._accumulate(np.matmul(out.grad, np.swapaxes(other.data, -1, -2)))
            other._accumulate(np.matmul(np.swapaxes(self.data, -1, -2), out.grad))

        out._backward = _backward
        return out

    # *** reductions ***

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = self._child(
            np.sum(self.data, axis=axis, keepdims=keepdims), (self,), "sum"
        )

        def _backward():
            grad = out.grad
            if axis is not None and not keepdims:
                axes = (axis,) if isinstance(axis, int) else tuple(axis)
                axes = tuple(sorted(a % self.ndim for a in axes))
                for a in axes:
                    grad = np.expand_dims(grad, a)
            self._accumulate(np.broadcast_to(grad, self.shape).copy())

        out._backward = _backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # *** movement ***

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        out = self._child(self.data.reshape(shape), (self,), "reshape")

        def _backward():
            self._accumulate(out.grad.reshape(old))

        out._backward = _backward
        return out

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        out = self._child(np.transpose(self.data, axes), (self,), "transpose")

        def _backward():
            self._accumulate(np.transpose(out.grad, np.argsort(axes)))

        out._backward = _backward
        return out

    def swapaxes(self, a: int, b: int) -> "Tensor":
        out = self._child(np.swapaxes(self.data, a, b), (self,), "swapaxes")

        def _backward():
            self._accumulate(np.swapaxes(out.grad, a, b))

        out._backward = _backward
        return out

    def __getitem__(self, index) -> "Tensor":
        out = self._child(np.asarray(self.data[index]), (self,), "getitem")

        def _backward():
            grad = np.zeros_like(self.data)
            if _is_basic_index(index):
                grad[index] = out.grad
            else:
                np.add.at(grad, index, out.grad)
            self._accumulate(grad)

        out._backward = _backward
        return out

    # *** elementwise ***

    def exp(self) -> "Tensor":
        value = np.exp(self.data)
        out = self._child(value, (self,), "exp")

        def _backward():
            self._accumulate(out.grad * value)

        out._backward = _backward
        return out

    def log(self) -> "Tensor":
        out = self._child(np.log(self.data), (self,), "log")

        def _backward():
            self._accumulate(out.grad / self.data)

        out._backward = _backward
        return out

    def tanh(self) -> "Tensor":
        value = np.tanh(self.data)
        out = self._child(value, (self,), "tanh")

        def _backward():
            self._accumulate(out.grad * (1.0 - value * value))

        out._backward = _backward
        return out

    def sigmoid(self) -> "Tensor":
        value = expit(self.data)
        out = self._child(value, (self,), "sigmoid")

        def _backward():
            self._accumulate(out.grad * value * (1.0 - value))

        out._backward = _backward
        return out

    def abs(self) -> "Tensor":
        out = self._child(np.abs(self.data), (self,), "abs")

        def _backward():
            # sign(0) = 0 is the subgradient choice at the kink
            self._accumulate(out.grad * np.sign(self.data))

        out._backward = _backward
        return out

    def clamp(self, lo: Optional[float] = None, hi: Optional[float] = None) -> "Tensor":
        """clamp bounds values to [lo, hi]; outside that range the gradient is zero"""
        value = np.clip(self.data, lo, hi)
        out = self._child(value, (self,), "clamp")

        def _backward():
            active = np.ones(self.shape, dtype=bool)
            if lo is not None:
                active &= self.data >= lo
            if hi is not None:
                active &= self.data <= hi
            self._accumulate(out.grad * active)

        out._backward = _backward
        return out


def as_tensor(data: ArrayLike, dtype=None) -> Tensor:
    if isinstance(data, Tensor):
        return data
    return Tensor(data, dtype=dtype)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """concat joins tensors along an existing axis"""
    if len(tensors) == 0:
        raise ShapeError("concat inputs", "at least one tensor", 0)
    sizes = [t.shape[axis] for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = tensors[0]._child(data, tuple(tensors), "concat")

    def _backward():
        offsets = np.cumsum(sizes)[:-1]
        for t, grad in zip(tensors, np.split(out.grad, offsets, axis=axis)):
            t._accumulate(grad)

    out._backward = _backward
    return out
