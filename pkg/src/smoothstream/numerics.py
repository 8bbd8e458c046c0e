"""Dense float64 helpers shared by the attention and model code.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The functions
here are the non-differentiable reference versions; the differentiable
counterparts live in :mod:`smoothstream.tape`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

LN_EPS = 1e-5


class DimensionError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with max subtraction.

    Rows whose entries are all ``-inf`` are not supported; callers mask
    before reaching here.
    """
    m = np.asarray(m, dtype=np.float64)
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x, gain=None, shift=None, eps: float = LN_EPS) -> np.ndarray:
    """Normalize over the last axis, then apply ``gain`` and ``shift``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise DimensionError("layer_norm needs at least 2 features")
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    y = (x - mu) / np.sqrt(var + eps)
    if gain is not None:
        y = y * gain
    if shift is not None:
        y = y + shift
    return y


def relu(x) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class LayerParams:
    """Affine layer ``x @ weight + bias`` with ``weight`` shaped in x out."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(f"weight {self.weight.shape} and bias {self.bias.shape} disagree")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.weight.shape[0]:
            raise DimensionError(f"input width {x.shape[-1]} does not match weight {self.weight.shape}")
        return x @ self.weight + self.bias


def ffn(x, first: LayerParams, second: LayerParams) -> np.ndarray:
    """Two-layer feed-forward block with a ReLU in between."""
    return second(relu(first(x)))


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def finite_diff_grad(
    loss_fn: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    step: float = 1e-4,
    names=None,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of ``loss_fn`` for every scalar parameter.

    ``params`` is perturbed in place one entry at a time and restored
    afterwards. ``names`` restricts which tensors are probed.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grads = {}
    for name in names if names is not None else list(params):
        p = params[name]
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(loss_fn(params))
            flat[i] = orig - step
            down = float(loss_fn(params))
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError(f"non-finite loss while probing {name}[{i}]")
            gflat[i] = (up - down) / (2 * step)
        grads[name] = g
    return grads
