"""Minimal reverse-mode automatic differentiation on float64 numpy arrays.

A Var wraps a value and remembers how it was produced; backward() walks the tape
in reverse topological order and accumulates vector-Jacobian products into .grad.
Operands that are plain numbers or ndarrays are treated as constants, so the same
forward code serves both trainable passes (parameters wrapped in Vars) and frozen
passes (parameters as raw arrays, gradients flowing only through the input).

Only the primitives needed by this package are implemented. Matmul supports the
2D (batch, features) case used by the MLPs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Var",
    "backward",
    "vsum",
    "vmean",
    "vconcat",
    "silu",
    "sigmoid",
    "vtanh",
    "vlog",
    "vclip",
]


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _val(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


class Var:
    __slots__ = ("value", "grad", "_parents", "_vjp")
    __array_ufunc__ = None  # make ndarray ops defer to our reflected methods

    def __init__(self, value, _parents: tuple = (), _vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    # -- binary arithmetic ------------------------------------------------

    def __add__(self, other):
        a, b = self.value, _val(other)
        out = a + b
        if isinstance(other, Var):
            return Var(out, (self, other), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
        return Var(out, (self,), lambda g: (_unbroadcast(g, a.shape),))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Var) else -_val(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Var(-self.value, (self,), lambda g: (-g,))

    def __mul__(self, other):
        a, b = self.value, _val(other)
        out = a * b
        if isinstance(other, Var):
            return Var(
                out,
                (self, other),
                lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
            )
        return Var(out, (self,), lambda g: (_unbroadcast(g * b, a.shape),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self.value, _val(other)
        out = a / b
        if isinstance(other, Var):
            return Var(
                out,
                (self, other),
                lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)),
            )
        return Var(out, (self,), lambda g: (_unbroadcast(g / b, a.shape),))

    def __rtruediv__(self, other):
        a, b = _val(other), self.value
        return Var(a / b, (self,), lambda g: (_unbroadcast(-g * a / (b * b), b.shape),))

    def __matmul__(self, other):
        a, b = self.value, _val(other)
        out = a @ b
        if isinstance(other, Var):
            return Var(out, (self, other), lambda g: (g @ b.T, a.T @ g))
        return Var(out, (self,), lambda g: (g @ b.T,))

    def __rmatmul__(self, other):
        a, b = _val(other), self.value
        return Var(a @ b, (self,), lambda g: (a.T @ g,))

    # -- shape ops ---------------------------------------------------------

    def __getitem__(self, idx):
        src_shape = self.value.shape

        def vjp(g):
            full = np.zeros(src_shape)
            full[idx] = g
            return (full,)

        return Var(self.value[idx], (self,), vjp)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src_shape = self.value.shape
        return Var(self.value.reshape(shape), (self,), lambda g: (g.reshape(src_shape),))


def vsum(v: Var, axis=None):
    shape = v.value.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Var(np.sum(v.value, axis=axis), (v,), vjp)


def vmean(v: Var, axis=None):
    n = v.value.size if axis is None else v.value.shape[axis]
    return vsum(v, axis=axis) * (1.0 / n)


def vconcat(parts, axis: int = -1):
    """Concatenate Vars and constants; gradients route to the Var parts."""
    vals = [_val(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    sizes = [val.shape[axis] for val in vals]
    offsets = np.cumsum([0] + sizes)
    var_slots = [i for i, p in enumerate(parts) if isinstance(p, Var)]
    parents = tuple(parts[i] for i in var_slots)

    def vjp(g):
        g = np.moveaxis(g, axis, -1)
        outs = []
        for i in var_slots:
            piece = g[..., offsets[i] : offsets[i + 1]]
            outs.append(np.moveaxis(piece, -1, axis))
        return tuple(outs)

    return Var(out, parents, vjp)


def silu(v: Var):
    x = v.value
    sig = 1.0 / (1.0 + np.exp(-x))
    return Var(x * sig, (v,), lambda g: (g * (sig * (1.0 + x * (1.0 - sig))),))


def sigmoid(v):
    s = 1.0 / (1.0 + np.exp(-_val(v)))
    if isinstance(v, Var):
        return Var(s, (v,), lambda g: (g * s * (1.0 - s),))
    return s


def vtanh(v):
    y = np.tanh(_val(v))
    if isinstance(v, Var):
        return Var(y, (v,), lambda g: (g * (1.0 - y * y),))
    return y


def vlog(v: Var):
    x = v.value
    return Var(np.log(x), (v,), lambda g: (g / x,))


def vclip(v: Var, lo: float, hi: float):
    x = v.value
    inside = ((x > lo) & (x < hi)).astype(np.float64)
    return Var(np.clip(x, lo, hi), (v,), lambda g: (g * inside,))


def backward(root: Var) -> None:
    """Fill .grad on every Var reachable from root; root must be scalar."""
    if root.value.shape != ():
        raise ValueError(f"backward needs a scalar root, got shape {root.value.shape}")
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones(())
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            parent.grad = g if parent.grad is None else parent.grad + g
