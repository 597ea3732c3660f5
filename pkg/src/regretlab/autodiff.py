"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tensor`` wraps an ndarray and records how it was produced. Calling
``backward()`` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every tensor created
with ``requires_grad=True``. Constants (plain arrays, or tensors with
``requires_grad=False``) short-circuit out of the walk, so mixing frozen
and trainable parameters in one graph costs nothing extra.

The op set is intentionally small: affine maps, tanh/relu, elementwise
arithmetic, L2 norms, sum/mean/max reductions, elementwise min/max,
clip, concatenation and basic slicing. Kinked ops (relu, min, max,
clip) use one-sided subgradients: the derivative of the branch that
produced the value, with exact ties resolved toward the first-listed
branch. ``l2norm`` has subgradient zero at the origin.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError

LOG_2PI = math.log(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    # Make numpy defer to our reflected operators instead of trying to
    # broadcast elementwise over the Tensor object.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.op = op

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph mechanics -----------------------------------------------

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        if not np.isfinite(self.data):
            raise NumericError(f"non-finite loss (op chain ending in '{_first_nonfinite(self)}')")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other), op="add")

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, parents=(self,), op="neg")

        def bw(g):
            if self.requires_grad:
                self._accumulate(-g)

        out._backward = bw
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other), op="mul")

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data / other.data, parents=(self, other), op="div")

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g * self.data / other.data**2, other.data.shape))

        out._backward = bw
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = Tensor(self.data**p, parents=(self,), op="pow")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * p * self.data ** (p - 1))

        out._backward = bw
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, parents=(self, other), op="matmul")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        out._backward = bw
        return out

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    def __getitem__(self, key):
        out = Tensor(self.data[key], parents=(self,), op="slice")

        def bw(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[key] = g
                self._accumulate(full)

        out._backward = bw
        return out

    # -- nonlinearities ------------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)
        out = Tensor(y, parents=(self,), op="tanh")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - y * y))

        out._backward = bw
        return out

    def relu(self):
        # relu(x) = max(x, 0); first-listed branch wins at x == 0.
        mask = self.data >= 0.0
        out = Tensor(np.where(mask, self.data, 0.0), parents=(self,), op="relu")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        out._backward = bw
        return out

    def exp(self):
        y = np.exp(self.data)
        out = Tensor(y, parents=(self,), op="exp")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * y)

        out._backward = bw
        return out

    def log(self):
        out = Tensor(np.log(self.data), parents=(self,), op="log")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        out._backward = bw
        return out

    def clip(self, lo: float, hi: float):
        # Derived from min/max with first-listed ties: gradient passes
        # on the closed interval [lo, hi].
        mask = (self.data >= lo) & (self.data <= hi)
        out = Tensor(np.clip(self.data, lo, hi), parents=(self,), op="clip")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g * mask)

        out._backward = bw
        return out

    # -- reductions ----------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,), op="sum")

        def bw(g):
            if self.requires_grad:
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        out._backward = bw
        return out

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self):
        """Global max; the subgradient goes to the first maximal entry."""
        idx = np.unravel_index(np.argmax(self.data), self.data.shape)
        out = Tensor(self.data[idx], parents=(self,), op="max")

        def bw(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[idx] = g
                self._accumulate(full)

        out._backward = bw
        return out

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), parents=(self,), op="reshape")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g.reshape(self.data.shape))

        out._backward = bw
        return out

    def repeat_rows(self, k: int):
        """Repeat each row k times (row i maps to rows i*k .. i*k+k-1)."""
        out = Tensor(np.repeat(self.data, k, axis=0), parents=(self,), op="repeat_rows")

        def bw(g):
            if self.requires_grad:
                self._accumulate(g.reshape(self.data.shape[0], k, *self.data.shape[1:]).sum(axis=1))

        out._backward = bw
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), parents=(a, b), op="min")

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    out._backward = bw
    return out


def maximum(a, b) -> Tensor:
    """Elementwise max; ties send the gradient to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data), parents=(a, b), op="max2")

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    out._backward = bw
    return out


def l2norm(x, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm along `axis` with subgradient 0 at the origin."""
    x = as_tensor(x)
    n = np.sqrt(np.sum(x.data**2, axis=axis, keepdims=keepdims))
    out = Tensor(n, parents=(x,), op="l2norm")

    def bw(g):
        if x.requires_grad:
            nk = n if keepdims else np.expand_dims(n, axis)
            gk = g if keepdims else np.expand_dims(g, axis)
            x._accumulate(gk * x.data / np.maximum(nk, 1e-300))

    out._backward = bw
    return out


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), parents=tuple(parts), op="concat")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])

    out._backward = bw
    return out


def diag_gauss_logpdf(x, mean, log_std) -> Tensor:
    """Row-wise log density of a diagonal Gaussian.

    `x` is (N, d) or (d,); `mean` and `log_std` are (d,) (either may be a
    trainable Tensor). Returns an (N,) tensor (or scalar for a single row).
    """
    x, mean, log_std = as_tensor(x), as_tensor(mean), as_tensor(log_std)
    diff = x - mean
    inv_var = (log_std * -2.0).exp()
    quad = (diff * diff * inv_var).sum(axis=-1)
    axis_sum = log_std.sum()
    d = mean.data.shape[-1]
    return quad * -0.5 - axis_sum - 0.5 * d * LOG_2PI


def _first_nonfinite(root: Tensor) -> str:
    """Name the op of the earliest non-finite node feeding `root`."""
    stack, seen, bad = [root], set(), root.op
    order: list[Tensor] = []
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        order.append(node)
        stack.extend(node._parents)
    for node in reversed(order):
        if not np.all(np.isfinite(node.data)):
            bad = node.op
            break
    return bad
