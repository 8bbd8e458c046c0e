"""Constant-cost streaming attention.

A :class:`StreamState` keeps, for every (query, head) pair, the numerator
``phi`` (kernel-weighted value sum) and denominator ``psi`` (kernel mass) of
the temporally smoothed attention. Two temporal kernels are supported:

* :class:`FifoMode` -- box kernel over the last ``capacity`` frames. New
  frames are added and the frame leaving the window is subtracted, so a ring
  buffer of (log kernel, value) pairs is kept.
* :class:`EsMode` -- Laplace kernel ``exp(-decay * age)``. Both accumulators
  are multiplied by ``exp(-decay)`` before the new frame is added; no buffer.

After consuming frame t the state represents frames ``[t - N + 1, t]`` (FIFO)
or the whole history (ES). ``psi`` is a scalar per (query, head): the frame's
kernel value is added to it, never ``kernel * value``.

Accumulators are stored relative to ``exp(log_scale)`` so that large query-key
dot products cannot overflow; the read-out ``phi / psi`` is unaffected.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Union

import numpy as np

from .attention import AttentionConfig, ProjectionWeights, softmax_attention
from .errors import ConfigError, EmptyStreamError, UsageError

LOG_BIG = math.log(1e100)
REBUILD_EVERY = 4096
# psi shrinking below this fraction in one eviction means the subtraction lost precision
CANCEL_RATIO = 1e-6


@dataclass(frozen=True)
class FifoMode:
    capacity: int


@dataclass(frozen=True)
class EsMode:
    decay: float


StreamMode = Union[FifoMode, EsMode]


class StreamState:
    def __init__(self, queries, proj: ProjectionWeights, mode: StreamMode, heads: int = 1):
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        M, C = queries.shape
        if proj.w_k.shape[1] != C or proj.w_v.shape[1] != C:
            raise ConfigError(f"projection width {proj.w_k.shape} does not match queries {queries.shape}")
        if isinstance(mode, FifoMode):
            if mode.capacity < 1:
                raise ConfigError("FIFO capacity must be >= 1")
        elif isinstance(mode, EsMode):
            if not mode.decay >= 0:
                raise ConfigError("ES decay must be >= 0")
        else:
            raise ConfigError(f"unknown stream mode {mode!r}")
        self.cfg = AttentionConfig(d=proj.w_k.shape[0], C=C, heads=heads)
        self.mode = mode
        self.proj = proj
        self.queries = queries
        self._q_heads = queries.reshape(M, heads, self.cfg.head_dim)
        self.phi = np.zeros((M, heads, self.cfg.head_dim))
        self.psi = np.zeros((M, heads))
        self.log_scale = np.zeros((M, heads))
        self.t = 0
        if isinstance(mode, FifoMode):
            self._ring_logk = np.zeros((mode.capacity, M, heads))
            self._ring_v = np.zeros((mode.capacity, heads, self.cfg.head_dim))
            self._since_rebuild = 0
        else:
            self._forget = math.exp(-mode.decay)

    @property
    def ring_length(self) -> int:
        if isinstance(self.mode, FifoMode):
            return min(self.t, self.mode.capacity)
        return 0

    def state_size(self) -> int:
        """Number of floats held by the state (excluding weights)."""
        n = self.phi.size + self.psi.size + self.log_scale.size
        if isinstance(self.mode, FifoMode):
            n += self._ring_logk.size + self._ring_v.size
        return n

    def _frame_terms(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        H, hd = self.cfg.heads, self.cfg.head_dim
        f = (x @ self.proj.w_k).reshape(H, hd)
        v = (x @ self.proj.w_v).reshape(H, hd)
        logk = np.einsum("mhc,hc->mh", self._q_heads, f) * self.cfg.scale
        return logk, v

    def rescale(self, shift):
        """Move a factor exp(shift) from the accumulators into ``log_scale``."""
        shift = np.broadcast_to(np.asarray(shift, dtype=np.float64), self.psi.shape)
        self.log_scale = self.log_scale + shift
        factor = np.exp(-shift)
        self.phi *= factor[..., None]
        self.psi *= factor

    def _guard_before_add(self, logk):
        over = logk - self.log_scale
        if np.any(over > LOG_BIG):
            self.rescale(np.where(over > LOG_BIG, over, 0.0))

    def _guard_after_add(self):
        big = np.maximum(self.psi, np.abs(self.phi).max(axis=-1))
        bad = (big > 1e100) | ((self.psi < 1e-100) & (self.psi > 0))
        if np.any(bad):
            self.rescale(np.where(bad, np.log(np.where(bad, self.psi, 1.0)), 0.0))

    def push(self, x):
        if isinstance(self.mode, FifoMode):
            self._fifo_push(x)
        else:
            self._es_push(x)

    def _es_push(self, x):
        logk, v = self._frame_terms(x)
        self._guard_before_add(logk)
        w = np.exp(logk - self.log_scale)
        self.phi *= self._forget
        self.psi *= self._forget
        self.phi += w[..., None] * v[None, :, :]
        self.psi += w
        self.t += 1
        self._guard_after_add()

    def _fifo_push(self, x):
        logk, v = self._frame_terms(x)
        N = self.mode.capacity
        slot = self.t % N
        self._guard_before_add(logk)
        w = np.exp(logk - self.log_scale)
        before = self.psi + w
        self.phi += w[..., None] * v[None, :, :]
        self.psi += w
        if self.t >= N:
            w_old = np.exp(self._ring_logk[slot] - self.log_scale)
            self.phi -= w_old[..., None] * self._ring_v[slot][None, :, :]
            self.psi -= w_old
        self._ring_logk[slot] = logk
        self._ring_v[slot] = v
        self.t += 1
        self._since_rebuild += 1
        if self._since_rebuild >= REBUILD_EVERY or np.any(self.psi <= CANCEL_RATIO * before):
            self.rebuild()
        else:
            self._guard_after_add()

    def rebuild(self):
        """Recompute FIFO accumulators exactly from the ring buffer."""
        if not isinstance(self.mode, FifoMode):
            raise UsageError("only FIFO states keep a ring buffer")
        n = self.ring_length
        self._since_rebuild = 0
        if n == 0:
            return
        logk = self._ring_logk[:n]
        self.log_scale = logk.max(axis=0)
        w = np.exp(logk - self.log_scale)
        self.psi = w.sum(axis=0)
        self.phi = np.einsum("nmh,nhc->mhc", w, self._ring_v[:n])

    def read(self) -> np.ndarray:
        """phi / psi per (query, head), heads concatenated into an M x C matrix."""
        if self.t == 0:
            raise EmptyStreamError("empty stream")
        out = self.phi / self.psi[..., None]
        return out.reshape(self.queries.shape[0], self.cfg.C)


def stream_init(queries, proj: ProjectionWeights, mode: StreamMode, heads: int = 1) -> StreamState:
    return StreamState(queries, proj, mode, heads)


def fifo_push(state: StreamState, x) -> None:
    if not isinstance(state.mode, FifoMode):
        raise UsageError("fifo_push on a non-FIFO stream")
    state._fifo_push(x)


def es_push(state: StreamState, x) -> None:
    if not isinstance(state.mode, EsMode):
        raise UsageError("es_push on a non-ES stream")
    state._es_push(x)


def stream_read(state: StreamState) -> np.ndarray:
    return state.read()


class WindowedAttention:
    """Sliding-window cross-attention baseline: full softmax over the last N frames per step.

    Keys and values of past frames are cached, so only the attention itself
    is recomputed each frame; its cost grows linearly with the window.
    """

    def __init__(self, queries, proj: ProjectionWeights, window: int, heads: int = 1):
        if window < 1:
            raise ConfigError("window must be >= 1")
        self.queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        self.proj = proj
        self.window = window
        self.cfg = AttentionConfig(d=proj.w_k.shape[0], C=self.queries.shape[1], heads=heads)
        self._k = np.zeros((window, self.cfg.C))
        self._v = np.zeros((window, self.cfg.C))
        self.t = 0

    def push(self, x):
        slot = self.t % self.window
        x = np.asarray(x, dtype=np.float64)
        self._k[slot] = x @ self.proj.w_k
        self._v[slot] = x @ self.proj.w_v
        self.t += 1

    def read(self) -> np.ndarray:
        if self.t == 0:
            raise EmptyStreamError("empty stream")
        n = min(self.t, self.window)
        return softmax_attention(self.queries, self._k[:n], self._v[:n], self.cfg)


@dataclass(frozen=True)
class CostStats:
    median_ns: float
    p95_ns: float
    samples: int


def per_frame_cost_probe(state, frames, reps: int = 5, warmup: int = 1) -> CostStats:
    """Wall time of one push + read, per frame, over ``reps`` passes of ``frames``.

    The first ``warmup`` passes are run but not recorded.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    frames = np.asarray(frames, dtype=np.float64)
    clock = time.perf_counter_ns
    samples = []
    for rep in range(warmup + reps):
        keep = rep >= warmup
        for x in frames:
            t0 = clock()
            state.push(x)
            state.read()
            dt = clock() - t0
            if keep:
                samples.append(dt)
    arr = np.asarray(samples, dtype=np.float64)
    return CostStats(float(np.median(arr)), float(np.percentile(arr, 95)), arr.size)
