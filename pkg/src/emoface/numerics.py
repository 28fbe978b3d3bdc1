"""Minimal float64 reverse-mode autodiff substrate.

All trainable computation in this package runs through the `Tensor` graph
defined here, and every backward rule is certified against central finite
differences by `grad_check`. Matrices are plain 2-D float64 numpy arrays in
C (row-major) order; `Tensor` wraps them with gradient bookkeeping.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_CUBIC = 0.044715


def require_finite(name: str, value: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} contains non-finite entries")
    return value


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Node in a reverse-mode computation graph over float64 arrays."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[], None] | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        # Constant subgraphs are pruned so backward never visits them.
        self._parents = tuple(p for p in parents if p.requires_grad)
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- graph execution ----------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable parameter."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.value + other.value, parents=(self, other))

        def backward():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad, self.value.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(out.grad, other.value.shape)

        out._backward = backward if out.requires_grad else None
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.value, parents=(self,))

        def backward():
            self.grad -= out.grad

        out._backward = backward if out.requires_grad else None
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.value * other.value, parents=(self, other))

        def backward():
            if self.requires_grad:
                self.grad += _unbroadcast(other.value * out.grad, self.value.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(self.value * out.grad, other.value.shape)

        out._backward = backward if out.requires_grad else None
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor(self.value / other.value, parents=(self, other))

        def backward():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad / other.value, self.value.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(
                    -out.grad * self.value / (other.value * other.value),
                    other.value.shape,
                )

        out._backward = backward if out.requires_grad else None
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.value @ other.value, parents=(self, other))

        def backward():
            if self.requires_grad:
                self.grad += out.grad @ other.value.T
            if other.requires_grad:
                other.grad += self.value.T @ out.grad

        out._backward = backward if out.requires_grad else None
        return out

    @property
    def T(self) -> "Tensor":
        out = Tensor(self.value.T, parents=(self,))

        def backward():
            self.grad += out.grad.T

        out._backward = backward if out.requires_grad else None
        return out

    def reshape(self, *shape) -> "Tensor":
        old = self.value.shape
        out = Tensor(self.value.reshape(*shape), parents=(self,))

        def backward():
            self.grad += out.grad.reshape(old)

        out._backward = backward if out.requires_grad else None
        return out

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.value.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad += np.broadcast_to(g, self.value.shape)

        out._backward = backward if out.requires_grad else None
        return out

    def sqrt(self) -> "Tensor":
        out = Tensor(np.sqrt(self.value), parents=(self,))

        def backward():
            self.grad += out.grad * 0.5 / out.value

        out._backward = backward if out.requires_grad else None
        return out

    def clip_min(self, lo: float) -> "Tensor":
        """max(x, lo) elementwise; gradient passes only where x > lo."""
        out = Tensor(np.maximum(self.value, lo), parents=(self,))

        def backward():
            self.grad += out.grad * (self.value > lo)

        out._backward = backward if out.requires_grad else None
        return out

    def narrow(self, axis: int, start: int, length: int) -> "Tensor":
        index = [slice(None)] * self.value.ndim
        index[axis] = slice(start, start + length)
        index = tuple(index)
        out = Tensor(self.value[index], parents=(self,))

        def backward():
            self.grad[index] += out.grad

        out._backward = backward if out.requires_grad else None
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(
        np.concatenate([t.value for t in tensors], axis=axis),
        parents=tuple(tensors),
    )

    def backward():
        offset = 0
        for t in tensors:
            n = t.value.shape[axis]
            index = [slice(None)] * out.value.ndim
            index[axis] = slice(offset, offset + n)
            if t.requires_grad:
                t.grad += out.grad[tuple(index)]
            offset += n

    out._backward = backward if out.requires_grad else None
    return out


def take_rows(t: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows by index; backward scatter-adds."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(t.value[idx], parents=(t,))

    def backward():
        np.add.at(t.grad, idx, out.grad)

    out._backward = backward if out.requires_grad else None
    return out


def scatter_rows(t: Tensor, idx: np.ndarray, num_rows: int) -> Tensor:
    """Accumulate rows of `t` into `num_rows` output rows at positions `idx`."""
    idx = np.asarray(idx, dtype=np.intp)
    acc = np.zeros((num_rows,) + t.value.shape[1:], dtype=np.float64)
    np.add.at(acc, idx, t.value)
    out = Tensor(acc, parents=(t,))

    def backward():
        t.grad += out.grad[idx]

    out._backward = backward if out.requires_grad else None
    return out


def gelu(x):
    """GELU, tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).

    Accepts floats, numpy arrays, or Tensors; returns the same kind.
    """
    if isinstance(x, Tensor):
        v = x.value
        inner = _GELU_C * (v + _GELU_CUBIC * v**3)
        th = np.tanh(inner)
        out = Tensor(0.5 * v * (1.0 + th), parents=(x,))

        def backward():
            sech2 = 1.0 - th * th
            dinner = _GELU_C * (1.0 + 3.0 * _GELU_CUBIC * v * v)
            x.grad += out.grad * (0.5 * (1.0 + th) + 0.5 * v * sech2 * dinner)

        out._backward = backward if out.requires_grad else None
        return out
    v = np.asarray(x, dtype=np.float64)
    result = 0.5 * v * (1.0 + np.tanh(_GELU_C * (v + _GELU_CUBIC * v**3)))
    return float(result) if np.isscalar(x) or np.ndim(x) == 0 else result


def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax of a vector (max-subtraction)."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty input")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_rows(x) -> "Tensor | np.ndarray":
    """Row-wise stable softmax over the last axis of a 2-D array or Tensor."""
    if isinstance(x, Tensor):
        v = x.value
        s = np.exp(v - v.max(axis=1, keepdims=True))
        s /= s.sum(axis=1, keepdims=True)
        out = Tensor(s, parents=(x,))

        def backward():
            g = out.grad
            x.grad += s * (g - (g * s).sum(axis=1, keepdims=True))

        out._backward = backward if out.requires_grad else None
        return out
    v = np.asarray(x, dtype=np.float64)
    s = np.exp(v - v.max(axis=1, keepdims=True))
    return s / s.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log(probs[label]) with the probability clamped at 1e-15."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise IndexError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(probs[label], 1e-15)))


class ParamStore:
    """Named trainable tensors. Values and grads always share a shape."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        require_finite(name, t.value)
        t.grad = np.zeros_like(t.value)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.value)
            else:
                t.grad.fill(0.0)

    def num_values(self) -> int:
        return sum(t.value.size for t in self._params.values())


def grad_check(
    f: Callable[[ParamStore], Tensor],
    params: ParamStore,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` must be a deterministic scalar function of the store. Every entry of
    every parameter is perturbed; the relative error is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    out = f(params)
    if not np.isfinite(out.item()):
        raise ValueError("objective is non-finite at the evaluation point")
    params.zero_grad()
    out.backward()
    analytic = {name: t.grad.copy() for name, t in params.items()}

    worst = 0.0
    for name, t in params.items():
        flat = t.value.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(params).item()
            flat[i] = orig - eps
            fm = f(params).item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(f"objective non-finite while probing {name}")
            numeric = (fp - fm) / (2.0 * eps)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
