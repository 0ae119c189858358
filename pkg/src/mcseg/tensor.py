"""Dense float64 tensors with reverse-mode automatic differentiation.

Deliberately small: only the operations the segmentation model needs, each
with a hand-written backward rule. Outputs record their parents on a tape;
``Tensor.backward()`` walks the tape in reverse topological order and
accumulates gradients into ``Tensor.grad``. Gradients are never zeroed
implicitly; callers reset them between optimizer steps.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

DTYPE = np.float64

_grad_enabled = True
_finite_checks = False


def set_finite_checks(enabled: bool) -> None:
    """Validate every op output for NaN/Inf. Slow; meant for test runs."""
    global _finite_checks
    _finite_checks = enabled


@contextmanager
def no_grad():
    """Disable graph recording inside the block (process-wide flag)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus an optional gradient buffer and graph linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into every reachable requires_grad node.

        ``self`` must be a scalar. Repeated calls without zero_grad add up.
        """
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
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

        flows: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        def send(t: "Tensor", g: np.ndarray) -> None:
            if not t.requires_grad:
                return
            prev = flows.get(id(t))
            flows[id(t)] = g if prev is None else prev + g

        for node in reversed(topo):
            if node._backward is None:
                continue
            g = flows.get(id(node))
            if g is None:
                continue
            node._backward(g, send)

        for node in topo:
            if not node.requires_grad:
                continue
            g = flows.get(id(node))
            if g is None:
                continue
            node.grad = g.copy() if node.grad is None else node.grad + g

    # operator sugar -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return shift(self, float(other))
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return shift(self, -float(other))
        return sub(self, other)

    def __rsub__(self, other):
        return shift(neg(self), float(other))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        raise TypeError("tensor division only supports scalar divisors")

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_view(self, key)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    if _finite_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values in op output")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def bw(g, send):
        send(a, _unbroadcast(g, a.data.shape))
        send(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def bw(g, send):
        send(a, _unbroadcast(g, a.data.shape))
        send(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def bw(g, send):
        send(a, _unbroadcast(g * b.data, a.data.shape))
        send(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def bw(g, send):
        send(a, -g)

    return _make(-a.data, (a,), bw)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)

    def bw(g, send):
        send(a, g * c)

    return _make(a.data * c, (a,), bw)


def shift(a, c: float) -> Tensor:
    a = as_tensor(a)

    def bw(g, send):
        send(a, g)

    return _make(a.data + c, (a,), bw)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def bw(g, send):
        send(a, g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), bw)


def masked_blend(mask, a, b) -> Tensor:
    """Elementwise ``mask ? a : b`` with a constant (non-differentiated) mask."""
    a, b = as_tensor(a), as_tensor(b)
    m = np.asarray(mask, dtype=bool)
    data = np.where(m, a.data, b.data)

    def bw(g, send):
        send(a, _unbroadcast(np.where(m, g, 0.0), a.data.shape))
        send(b, _unbroadcast(np.where(m, 0.0, g), b.data.shape))

    return _make(data, (a, b), bw)


# linear algebra ----------------------------------------------------------


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes must match or b is 2-D."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ValueError("matmul operands must have at least 2 dimensions")
    if ad.shape[-1] != bd.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")
    if bd.ndim > 2 and bd.shape[:-2] != ad.shape[:-2]:
        raise ValueError(f"matmul batch mismatch: {ad.shape} @ {bd.shape}")
    data = ad @ bd

    def bw(g, send):
        if a.requires_grad:
            send(a, g @ _swap_last(bd))
        if b.requires_grad:
            if bd.ndim == 2 and ad.ndim > 2:
                a2 = ad.reshape(-1, ad.shape[-1])
                g2 = g.reshape(-1, g.shape[-1])
                send(b, a2.T @ g2)
            else:
                send(b, _swap_last(ad) @ g)

    return _make(data, (a, b), bw)


# reductions and shape ----------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g, send):
        if axis is None:
            send(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            send(a, np.broadcast_to(gg, a.data.shape).copy())

    return _make(data, (a,), bw)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def bw(g, send):
        send(a, g.reshape(a.data.shape))

    return _make(data, (a,), bw)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)

    def bw(g, send):
        send(a, g.transpose(inv))

    return _make(a.data.transpose(axes), (a,), bw)


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g, send):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            send(p, piece)

    return _make(data, tuple(parts), bw)


def slice_view(a, key) -> Tensor:
    """Basic slicing only (ints, slices, tuples thereof); no index arrays."""
    a = as_tensor(a)
    if isinstance(key, tuple):
        parts = key
    else:
        parts = (key,)
    for k in parts:
        if not isinstance(k, (int, slice, type(Ellipsis))):
            raise TypeError("slice_view supports basic slicing only")
    data = a.data[key]

    def bw(g, send):
        buf = np.zeros_like(a.data)
        buf[key] += g
        send(a, buf)

    return _make(data, (a,), bw)


# softmax family -----------------------------------------------------------


def softmax(a, axis: int = -1, mask=None) -> Tensor:
    """Row-stochastic softmax along ``axis``; masked entries come out exactly 0.

    ``mask`` is a constant boolean array broadcastable to ``a`` marking valid
    positions. Every slice along ``axis`` must keep at least one valid entry.
    """
    a = as_tensor(a)
    d = a.data
    if mask is None:
        m = d.max(axis=axis, keepdims=True)
        e = np.exp(d - m)
    else:
        valid = np.broadcast_to(np.asarray(mask, dtype=bool), d.shape)
        shifted = np.where(valid, d, -np.inf)
        m = shifted.max(axis=axis, keepdims=True)
        e = np.exp(np.where(valid, d - m, -np.inf))
    s = e.sum(axis=axis, keepdims=True)
    y = e / s

    def bw(g, send):
        inner = (g * y).sum(axis=axis, keepdims=True)
        send(a, y * (g - inner))

    return _make(y, (a,), bw)


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if a.data.shape[axis] == 0:
        raise ValueError("logsumexp over an empty axis")
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    soft = e / s
    out = m + np.log(s)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def bw(g, send):
        gg = g if keepdims else np.expand_dims(g, axis)
        send(a, gg * soft)

    return _make(out, (a,), bw)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    n = a.data.shape[-1]
    if n < 2:
        raise ValueError("layer_norm needs at least 2 features per row")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def bw(g, send):
        if gain.requires_grad:
            send(gain, (g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            send(bias, g.reshape(-1, n).sum(axis=0))
        if a.requires_grad:
            dxhat = g * gain.data
            t1 = dxhat.mean(axis=-1, keepdims=True)
            t2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            send(a, inv * (dxhat - t1 - xhat * t2))

    return _make(data, (a, gain, bias), bw)


# gathers -------------------------------------------------------------------


def embedding_lookup(table, ids) -> Tensor:
    """Rows of ``table`` selected by an integer array; grads scatter-add back."""
    table = as_tensor(table)
    idx = np.asarray(ids)
    data = table.data[idx]

    def bw(g, send):
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        send(table, buf)

    return _make(data, (table,), bw)


def gather_last(a, ids) -> Tensor:
    """Pick one entry along the last axis per leading position."""
    a = as_tensor(a)
    idx = np.asarray(ids)
    if idx.shape != a.data.shape[:-1]:
        raise ValueError("gather_last index shape must match leading dims")
    data = np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0]

    def bw(g, send):
        buf = np.zeros_like(a.data)
        flat = buf.reshape(-1, buf.shape[-1])
        rows = np.arange(flat.shape[0])
        # one hit per row, so plain fancy assignment accumulates correctly
        flat[rows, idx.reshape(-1)] += g.reshape(-1)
        send(a, buf)

    return _make(data, (a,), bw)


def take(a, index_arrays) -> Tensor:
    """Advanced indexing by a tuple of integer arrays (may repeat entries)."""
    a = as_tensor(a)
    idx = tuple(np.asarray(i) for i in index_arrays)
    data = a.data[idx]

    def bw(g, send):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        send(a, buf)

    return _make(data, (a,), bw)
