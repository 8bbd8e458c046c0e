"""Softmax attention, its kernel form, and temporal smoothing kernels.

Everything here is the plain (non-streaming) evaluation. These functions are
the brute-force references that the streaming recursions are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .numerics import DimensionError, as_matrix


@dataclass(frozen=True)
class AttentionConfig:
    d: int
    C: int
    heads: int = 1

    def __post_init__(self):
        if self.C % self.heads:
            raise ValueError(f"C={self.C} is not divisible by heads={self.heads}")

    @property
    def head_dim(self) -> int:
        return self.C // self.heads

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.head_dim)


@dataclass(frozen=True)
class ProjectionWeights:
    """Key/value maps (d x C); ``w_q`` and ``w_o`` are optional C x C maps."""

    w_k: np.ndarray
    w_v: np.ndarray
    w_q: Optional[np.ndarray] = None
    w_o: Optional[np.ndarray] = None

    def keys(self, X) -> np.ndarray:
        return as_matrix(X) @ self.w_k

    def values(self, X) -> np.ndarray:
        return as_matrix(X) @ self.w_v

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, C: int, with_query: bool = False):
        b_in, b_c = 1 / math.sqrt(d), 1 / math.sqrt(C)
        return cls(
            w_k=rng.uniform(-b_in, b_in, (d, C)),
            w_v=rng.uniform(-b_in, b_in, (d, C)),
            w_q=rng.uniform(-b_c, b_c, (C, C)) if with_query else None,
        )


# temporal kernels


@dataclass(frozen=True)
class Box:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("box window must be >= 1")


@dataclass(frozen=True)
class Laplace:
    decay: float

    def __post_init__(self):
        if not self.decay > 0:
            raise ValueError("Laplace decay must be > 0 (use Constant for 0)")


@dataclass(frozen=True)
class Constant:
    pass


TemporalKernel = Union[Box, Laplace, Constant]


def temporal_weight(kernel: TemporalKernel, t: int, n: int) -> float:
    if n > t:
        raise ValueError(f"future index: n={n} > t={t}")
    age = t - n
    if isinstance(kernel, Box):
        return 1.0 if age < kernel.N else 0.0
    if isinstance(kernel, Laplace):
        return math.exp(-kernel.decay * age)
    return 1.0


def decay_for_window(N: int, tail: float = 1e-3) -> float:
    """Decay that makes the oldest weight of an N-frame window equal ``tail``."""
    if N < 2:
        return 0.0
    return -math.log(tail) / (N - 1)


# attention


def log_kappa(q, k, cfg: AttentionConfig) -> float:
    return cfg.scale * float(np.dot(q, k))


def kappa(q, k, cfg: AttentionConfig) -> float:
    """exp(q.k / sqrt(C/heads)); always positive."""
    return math.exp(log_kappa(q, k, cfg))


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    rows, C = x.shape
    return x.reshape(rows, heads, C // heads).transpose(1, 0, 2)


def softmax_attention(Q, K, V, cfg: AttentionConfig, mask=None) -> np.ndarray:
    """Softmax(Q K^T * scale + mask) V, split into ``cfg.heads`` heads."""
    Q, K, V = as_matrix(Q), as_matrix(K), as_matrix(V)
    if Q.shape[1] != cfg.C or K.shape[1] != cfg.C or V.shape[1] != cfg.C or K.shape[0] != V.shape[0]:
        raise DimensionError(f"Q {Q.shape}, K {K.shape}, V {V.shape} inconsistent with C={cfg.C}")
    logits = _split_heads(Q, cfg.heads) @ _split_heads(K, cfg.heads).transpose(0, 2, 1) * cfg.scale
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape[-1] != K.shape[0]:
            raise DimensionError(f"mask {mask.shape} does not cover {K.shape[0]} keys")
        if np.any(np.all(np.isneginf(np.broadcast_to(mask, (Q.shape[0], K.shape[0]))), axis=-1)):
            raise ValueError("fully masked query")
        logits = logits + mask
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    out = w @ _split_heads(V, cfg.heads)
    return out.transpose(1, 0, 2).reshape(Q.shape[0], cfg.C)


def kernel_attention(q, X, proj: ProjectionWeights, cfg: AttentionConfig, kernel: TemporalKernel = Constant()) -> np.ndarray:
    """Normalized kernel-weighted sum of values for a single query over rows of X.

    With a temporal ``kernel`` the row index is the frame index and the last
    row is the current frame, giving the smoothed (streaming) attention.
    Every (frame, head) weight is computed explicitly.
    """
    X = as_matrix(X)
    N = X.shape[0]
    if N == 0:
        raise ValueError("empty sequence")
    q = np.asarray(q, dtype=np.float64)
    K = proj.keys(X)
    V = proj.values(X)
    hd = cfg.head_dim
    out = np.empty(cfg.C)
    t = N - 1
    temporal = np.array([temporal_weight(kernel, t, n) for n in range(N)])
    live = temporal > 0
    for h in range(cfg.heads):
        sl = slice(h * hd, (h + 1) * hd)
        logk = np.array([log_kappa(q[sl], K[n, sl], cfg) for n in range(N)])
        logw = np.full(N, -np.inf)
        logw[live] = logk[live] + np.log(temporal[live])
        # common shift cancels between numerator and denominator
        w = np.exp(logw - logw.max())
        out[sl] = (w[:, None] * V[:, sl]).sum(axis=0) / w.sum()
    return out


def es_log_mask(N: int, decay: float) -> np.ndarray:
    """Row [-decay*(N-1), ..., -decay, 0]: the elementwise log of the smoothing matrix."""
    return -decay * np.arange(N - 1, -1, -1, dtype=np.float64)


def es_attention_windowed(Qpp, K, V, decay: float, cfg: AttentionConfig) -> np.ndarray:
    """Windowed exponential-smoothing attention in matrix form (training path)."""
    if decay < 0:
        raise ValueError("decay must be >= 0")
    K = as_matrix(K)
    return softmax_attention(Qpp, K, V, cfg, mask=es_log_mask(K.shape[0], decay)[None, :])


def sinusoidal_embedding(positions, C: int) -> np.ndarray:
    """Fixed sin/cos table; row p is the embedding of position p."""
    pos = np.asarray(positions, dtype=np.float64)[:, None]
    i = np.arange(C)
    freq = 1.0 / (10000.0 ** ((i - i % 2) / C))
    angle = pos * freq
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
