"""
Reverse-mode automatic differentiation over numpy arrays.

Every operation on a Tensor is recorded on its Tape together with a closure
that maps the output gradient to input gradients. Complex tensors use the
convention grad = dL/dRe + i dL/dIm for a real loss L, so holomorphic rules
carry a conjugate (mul: g * conj(b), matmul: g @ b^H) and a real input
receives the real part of its incoming gradient.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import DimensionError, NumericalError

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _herm(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


class Tensor:
    """A value on a tape. Only tensors created by `Tape.variable` are leaves with gradients."""

    # numpy must defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", data: np.ndarray, requires_grad: bool, ident: int):
        self.tape = tape
        self.data = data
        self.requires_grad = requires_grad
        self.id = ident

    def __repr__(self) -> str:
        kind = "var" if self.requires_grad else "const"
        return f"Tensor({kind}, shape={self.data.shape}, dtype={self.data.dtype})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(np.real(self.data))

    def __float__(self) -> float:
        return self.item()

    def detach(self) -> "Tensor":
        return self.tape.constant(self.data)

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            if other.tape is not self.tape:
                raise DimensionError("Tensors from different tapes cannot be combined")
            return other
        return self.tape.constant(other)

    # arithmetic

    def __add__(self, other):
        other = self._lift(other)
        return self.tape.record(self.data + other.data, (self, other), lambda g: (g, g))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return self.tape.record(self.data - other.data, (self, other), lambda g: (g, -g))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return self.tape.record(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self.data, other.data
        return self.tape.record(a * b, (self, other), lambda g: (g * np.conj(b), g * np.conj(a)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise NotImplementedError("Division by a tensor is not supported")
        return self * (1.0 / np.asarray(other))

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self.data, other.data
        return self.tape.record(a @ b, (self, other), lambda g: (g @ _herm(b), _herm(a) @ g))

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    def __getitem__(self, index):
        shape = self.data.shape
        dtype = self.data.dtype

        def backward(g):
            full = np.zeros(shape, dtype=np.result_type(dtype, g.dtype))
            full[index] += g
            return (full,)

        return self.tape.record(self.data[index], (self,), backward)

    def reshape(self, *shape):
        original = self.data.shape
        return self.tape.record(self.data.reshape(*shape), (self,), lambda g: (g.reshape(original),))

    def dagger(self):
        return self.tape.record(_herm(self.data), (self,), lambda g: (_herm(g),))

    # reductions

    def sum(self, axis=None, keepdims: bool = False):
        shape = self.data.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return self.tape.record(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # elementwise real functions

    def exp(self):
        out = np.exp(self.data)
        return self.tape.record(out, (self,), lambda g: (g * out,))

    def sigmoid(self):
        out = 1.0 / (1.0 + np.exp(-self.data))
        return self.tape.record(out, (self,), lambda g: (g * out * (1.0 - out),))

    def rsqrt(self):
        out = 1.0 / np.sqrt(self.data)
        return self.tape.record(out, (self,), lambda g: (g * (-0.5) * out ** 3,))

    def abs(self):
        x = self.data
        return self.tape.record(np.abs(x), (self,), lambda g: (g * np.sign(x),))

    def abs2(self):
        """Elementwise squared modulus, real valued."""
        x = self.data
        out = x.real ** 2 + x.imag ** 2 if np.iscomplexobj(x) else x * x
        return self.tape.record(out, (self,), lambda g: (2.0 * g * x,))


class Tape:
    """Records one forward computation; supports exactly one backward pass."""

    def __init__(self):
        self._records: List[Tuple[int, Tuple[Tensor, ...], BackwardFn]] = []
        self._next_id = 0
        self._consumed = False

    def __len__(self) -> int:
        return len(self._records)

    def _new(self, data, requires_grad: bool) -> Tensor:
        if self._consumed:
            raise NumericalError("Tape already consumed by a backward pass")
        tensor = Tensor(self, data, requires_grad, self._next_id)
        self._next_id += 1
        return tensor

    def constant(self, data) -> Tensor:
        return self._new(np.asarray(data), False)

    def variable(self, data) -> Tensor:
        return self._new(np.asarray(data, dtype=np.float64), True)

    def record(self, data, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        data = np.asarray(data)
        if not any(p.requires_grad for p in parents):
            return self._new(data, False)
        out = self._new(data, True)
        self._records.append((out.id, tuple(parents), backward))
        return out

    def backward(self, loss: Tensor, wrt: Sequence[Tensor]) -> List[np.ndarray]:
        """Gradients of a scalar loss with respect to `wrt`; untouched variables get exact zeros."""
        if self._consumed:
            raise NumericalError("Tape already consumed by a backward pass")
        if loss.data.size != 1:
            raise DimensionError(f"Loss must be a scalar, got shape {loss.data.shape}")
        self._consumed = True

        grads: Dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
        for out_id, parents, backward in reversed(self._records):
            g = grads.pop(out_id, None)
            if g is None:
                continue
            for parent, pg in zip(parents, backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(np.asarray(pg), parent.data.shape)
                if not np.iscomplexobj(parent.data) and np.iscomplexobj(pg):
                    pg = pg.real
                if parent.id in grads:
                    grads[parent.id] = grads[parent.id] + pg
                else:
                    grads[parent.id] = pg

        return [
            np.array(grads[v.id], dtype=v.data.dtype) if v.id in grads else np.zeros_like(v.data)
            for v in wrt
        ]


def value_of(x) -> np.ndarray:
    """Underlying array of a tensor or array-like."""
    return x.data if isinstance(x, Tensor) else np.asarray(x)
