"""Minimal reverse-mode autodiff over numpy arrays.

Primitives work at array granularity (matmul, softmax, layer norm, ...) and
broadcast like numpy. A :class:`Var` created without a tape is a plain value
holder: ops on such values compute results but record nothing, which is how
inference runs.
"""
from __future__ import annotations

import numpy as np

from .numerics import LN_EPS


class Var:
    __slots__ = ("value", "grad", "tape")

    def __init__(self, value, tape: "Tape | None" = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, recorded={self.tape is not None})"


class Tape:
    """Ordered record of primitive ops for one backward pass."""

    def __init__(self):
        self.nodes = []

    def param(self, value) -> Var:
        return Var(value, self)

    def record(self, out: Var, parents, backward):
        self.nodes.append((out, parents, backward))
        out.tape = self
        return out

    def backward(self, loss: Var) -> int:
        """Propagate d(loss)/d(.) to every Var on the tape; returns the op count visited."""
        if loss.value.size != 1:
            raise ValueError("backward needs a scalar loss")
        loss.grad = np.ones_like(loss.value)
        visited = 0
        for out, parents, backward in reversed(self.nodes):
            visited += 1
            if out.grad is None:
                continue
            grads = backward(out.grad)
            for parent, g in zip(parents, grads):
                if parent.tape is None or g is None:
                    continue
                g = _unbroadcast(g, parent.value.shape)
                parent.grad = g if parent.grad is None else parent.grad + g
        return visited


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _wrap(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _tape_of(*vs):
    for v in vs:
        if v.tape is not None:
            return v.tape
    return None


def _emit(value, parents, backward):
    out = Var(value)
    tape = _tape_of(*parents)
    if tape is not None:
        tape.record(out, parents, backward)
    return out


def add(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    return _emit(a.value + b.value, (a, b), lambda g: (g, g))


def mul(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    av, bv = a.value, b.value
    return _emit(av * bv, (a, b), lambda g: (g * bv, g * av))


def matmul(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    av, bv = a.value, b.value

    def backward(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return ga, gb

    return _emit(av @ bv, (a, b), backward)


def relu(x) -> Var:
    x = _wrap(x)
    on = x.value > 0
    return _emit(np.where(on, x.value, 0.0), (x,), lambda g: (g * on,))


def softmax(x, mask=None) -> Var:
    """Softmax over the last axis; ``mask`` is an additive constant (may hold ``-inf``)."""
    x = _wrap(x)
    z = x.value if mask is None else x.value + mask
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _emit(p, (x,), backward)


def layer_norm(x, gain, shift, eps: float = LN_EPS) -> Var:
    x, gain, shift = _wrap(x), _wrap(gain), _wrap(shift)
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    inv = 1.0 / np.sqrt((xc**2).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gv = gain.value

    def backward(g):
        gx_hat = g * gv
        n = xhat.shape[-1]
        gx = inv / n * (n * gx_hat - gx_hat.sum(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True))
        return gx, g * xhat, g

    return _emit(xhat * gv + shift.value, (x, gain, shift), backward)


def concat(parts, axis: int) -> Var:
    """Concatenate along a negative ``axis``; leading (batch) dims broadcast."""
    if axis >= 0:
        raise ValueError("concat takes a negative axis")
    parts = [_wrap(p) for p in parts]
    values = [p.value for p in parts]
    lead = np.broadcast_shapes(*[v.shape[: v.ndim + axis] for v in values])
    values = [np.broadcast_to(v, lead + v.shape[v.ndim + axis :]) for v in values]
    ax = values[0].ndim + axis
    sizes = [v.shape[ax] for v in values]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=ax))

    return _emit(np.concatenate(values, axis=ax), tuple(parts), backward)


def take(x, index, axis: int) -> Var:
    """Select ``index`` (slice or int array) along ``axis``."""
    x = _wrap(x)
    sel = [slice(None)] * x.value.ndim
    sel[axis] = index
    sel = tuple(sel)
    shape = x.value.shape

    def backward(g):
        full = np.zeros(shape)
        if isinstance(index, slice):
            full[sel] = g
        else:
            np.add.at(full, sel, g)
        return (full,)

    return _emit(x.value[sel], (x,), backward)


def reshape(x, shape) -> Var:
    x = _wrap(x)
    orig = x.value.shape
    return _emit(x.value.reshape(shape), (x,), lambda g: (g.reshape(orig),))


def swapaxes(x, a: int, b: int) -> Var:
    x = _wrap(x)
    return _emit(np.swapaxes(x.value, a, b), (x,), lambda g: (np.swapaxes(g, a, b),))


def total(x) -> Var:
    x = _wrap(x)
    shape = x.value.shape
    return _emit(x.value.sum(), (x,), lambda g: (np.broadcast_to(g, shape),))


def cross_entropy(logits, labels) -> Var:
    """Mean negative log-likelihood of integer ``labels`` over all leading positions."""
    logits = _wrap(logits)
    labels = np.asarray(labels)
    z = logits.value - logits.value.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    count = picked.size

    def backward(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, labels[..., None], 1.0, axis=-1)
        return ((p - onehot) * (g / count),)

    return _emit(np.asarray(-picked.mean()), (logits,), backward)
