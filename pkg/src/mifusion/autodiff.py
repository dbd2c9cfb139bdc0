"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

A Tensor wraps an ndarray plus the tape hooks needed for backprop. Ops build
the graph eagerly; calling ``backward()`` on a scalar walks it in reverse
topological order. Branches with no trainable leaves are pruned at
construction, so constants (e.g. history-memory embeddings) cost nothing.
"""

import numpy as np


def _as_array(x):
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:  # iterative DFS; training graphs can be deep
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
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def accum_grad(t: Tensor, g):
    """Add ``g`` into ``t.grad``, allocating it on first touch."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def apply_op(data, parents, backward) -> Tensor:
    """Create a graph node; prunes to a constant when no parent needs grad."""
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data)
    out.requires_grad = True
    out._parents = tuple(parents)
    out._backward = backward
    return out


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def bwd():
        accum_grad(a, _unbroadcast(out.grad, a.data.shape))
        accum_grad(b, _unbroadcast(out.grad, b.data.shape))

    out = apply_op(out_data, (a, b), bwd)
    return out


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data - b.data

    def bwd():
        accum_grad(a, _unbroadcast(out.grad, a.data.shape))
        accum_grad(b, _unbroadcast(-out.grad, b.data.shape))

    out = apply_op(out_data, (a, b), bwd)
    return out


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def bwd():
        accum_grad(a, _unbroadcast(out.grad * b.data, a.data.shape))
        accum_grad(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out = apply_op(out_data, (a, b), bwd)
    return out


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data / b.data

    def bwd():
        accum_grad(a, _unbroadcast(out.grad / b.data, a.data.shape))
        accum_grad(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.data.shape))

    out = apply_op(out_data, (a, b), bwd)
    return out


def neg(a):
    a = _wrap(a)

    def bwd():
        accum_grad(a, -out.grad)

    out = apply_op(-a.data, (a,), bwd)
    return out


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    out_data = a.data @ b.data

    def bwd():
        accum_grad(a, out.grad @ b.data.T)
        accum_grad(b, a.data.T @ out.grad)

    out = apply_op(out_data, (a, b), bwd)
    return out


def transpose(a):
    a = _wrap(a)

    def bwd():
        accum_grad(a, out.grad.T)

    out = apply_op(a.data.T, (a,), bwd)
    return out


def reshape(a, shape):
    a = _wrap(a)

    def bwd():
        accum_grad(a, out.grad.reshape(a.data.shape))

    out = apply_op(a.data.reshape(shape), (a,), bwd)
    return out


def tsum(a, axis=None, keepdims=False):
    a = _wrap(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        accum_grad(a, np.broadcast_to(g, a.data.shape))

    out = apply_op(out_data, (a,), bwd)
    return out


def tmean(a, axis=None, keepdims=False):
    a = _wrap(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def exp(a):
    a = _wrap(a)
    out_data = np.exp(a.data)

    def bwd():
        accum_grad(a, out.grad * out.data)

    out = apply_op(out_data, (a,), bwd)
    return out


def log(a):
    a = _wrap(a)

    def bwd():
        accum_grad(a, out.grad / a.data)

    out = apply_op(np.log(a.data), (a,), bwd)
    return out


def sqrt(a):
    a = _wrap(a)
    out_data = np.sqrt(a.data)

    def bwd():
        accum_grad(a, out.grad * 0.5 / out.data)

    out = apply_op(out_data, (a,), bwd)
    return out


def tanh(a):
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def bwd():
        accum_grad(a, out.grad * (1.0 - out.data * out.data))

    out = apply_op(out_data, (a,), bwd)
    return out


def sigmoid(a):
    a = _wrap(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd():
        accum_grad(a, out.grad * out.data * (1.0 - out.data))

    out = apply_op(out_data, (a,), bwd)
    return out


def relu(a):
    a = _wrap(a)

    def bwd():
        accum_grad(a, out.grad * (a.data > 0))

    out = apply_op(np.maximum(a.data, 0.0), (a,), bwd)
    return out


def softplus(a):
    """log(1 + e^x), evaluated stably."""
    a = _wrap(a)
    out_data = np.logaddexp(0.0, a.data)

    def bwd():
        x = a.data
        s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        accum_grad(a, out.grad * s)

    out = apply_op(out_data, (a,), bwd)
    return out


def absolute(a):
    a = _wrap(a)

    def bwd():
        accum_grad(a, out.grad * np.sign(a.data))

    out = apply_op(np.abs(a.data), (a,), bwd)
    return out


def clamp_min(a, floor: float):
    """max(a, floor) elementwise; gradient passes only where a > floor."""
    a = _wrap(a)
    mask = a.data > floor

    def bwd():
        accum_grad(a, out.grad * mask)

    out = apply_op(np.maximum(a.data, floor), (a,), bwd)
    return out


def concat(parts, axis=0):
    parts = [_wrap(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bwd():
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(offset, offset + size)
            accum_grad(p, out.grad[tuple(sl)])
            offset += size

    out = apply_op(out_data, tuple(parts), bwd)
    return out


def take_rows(a, idx):
    a = _wrap(a)
    idx = np.asarray(idx)

    def bwd():
        g = np.zeros_like(a.data)
        np.add.at(g, idx, out.grad)
        accum_grad(a, g)

    out = apply_op(a.data[idx], (a,), bwd)
    return out


def diag_part(a):
    a = _wrap(a)
    n = a.data.shape[0]

    def bwd():
        g = np.zeros_like(a.data)
        g[np.arange(n), np.arange(n)] = out.grad
        accum_grad(a, g)

    out = apply_op(np.diag(a.data).copy(), (a,), bwd)
    return out


def normalize_rows(a, eps=0.0):
    """Scale each row to unit Euclidean norm."""
    norms = sqrt(tsum(a * a, axis=1, keepdims=True) + eps)
    return a / norms


def logsumexp_rows(a):
    """log sum_j exp(a_ij) per row; inputs here are cosines so no shifting."""
    return log(tsum(exp(a), axis=1))
