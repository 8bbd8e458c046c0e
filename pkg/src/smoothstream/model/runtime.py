"""Frame-by-frame inference.

Long memory holds every frame that has aged out of the L-frame short window
and lives in an exponential-smoothing :class:`StreamState`; each step pushes
at most one frame into it, so the per-step cost does not depend on how long
the stream has been running.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .. import tape as tp
from ..attention import ProjectionWeights
from ..streaming import EsMode, StreamState
from .forward import as_vars, decode, encode_stage2, stage1_queries, stage1_tail
from .params import ModelParams


class StreamRuntime:
    def __init__(self, params: ModelParams):
        cfg = params.config
        self.params = params
        self.config = cfg
        self.P = as_vars(params)
        self.short = deque(maxlen=cfg.L)
        self.t = 0
        self.long = None
        if cfg.long_memory:
            # stage-1 queries do not depend on the input, so they are computed once
            self._queries = stage1_queries(self.P, cfg)
            q = self._queries.value @ params["enc1.cross.wq"]
            proj = ProjectionWeights(w_k=params["enc1.cross.wk"], w_v=params["enc1.cross.wv"])
            self.long = StreamState(q, proj, EsMode(cfg.lam), heads=cfg.heads)

    @property
    def long_frames(self) -> int:
        return 0 if self.long is None else self.long.t

    def compressed_memory(self):
        """Stage-1 output from the streaming read, or None while long memory is empty."""
        if self.long is None or self.long.t == 0:
            return None
        attended = tp.Var(self.long.read() @ self.params["enc1.cross.wo"])
        return stage1_tail(self.P, self._queries, attended)

    def step(self, x) -> np.ndarray:
        cfg = self.config
        x = np.asarray(x, dtype=np.float64).reshape(cfg.d)
        if len(self.short) == cfg.L:
            aged = self.short.popleft()
            if self.long is not None:
                self.long.push(aged)
        self.short.append(x)
        self.t += 1
        pad = cfg.L - len(self.short)
        window = np.zeros((cfg.L, cfg.d))
        window[pad:] = np.asarray(self.short)
        Z = self.compressed_memory()
        Z_enc = None if Z is None else encode_stage2(self.P, cfg, Z)
        logits = decode(self.P, cfg, Z_enc, window, pad=pad).value
        return logits[cfg.L - 1 :]


def forward_stream_step(runtime: StreamRuntime, x) -> np.ndarray:
    """Scores for the current frame (row 0) and the L_a anticipated frames."""
    return runtime.step(x)


def run_stream(params: ModelParams, frames) -> np.ndarray:
    """Step a fresh runtime through ``frames``; returns ``(T, 1 + L_a, K + 1)`` logits."""
    rt = StreamRuntime(params)
    return np.stack([rt.step(x) for x in np.asarray(frames, dtype=np.float64)])
