"""Batch (training) forward pass of the toy detector, written against the tape.

Shapes carry an optional leading batch axis: a clip is ``(N + L, d)`` and a
batch of clips ``(B, N + L, d)``. Parameters enter as :class:`~smoothstream.tape.Var`
so that the same code serves inference (no tape) and training (recorded).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import tape as tp
from ..attention import es_log_mask, sinusoidal_embedding
from ..errors import DataError
from .config import ModelConfig
from .params import ModelParams

NEG_INF = -np.inf


def as_vars(params: ModelParams, tape: tp.Tape | None = None) -> dict:
    if tape is None:
        return {k: tp.Var(v) for k, v in params.tensors.items()}
    return {k: tape.param(v) for k, v in params.tensors.items()}


def _heads(x: tp.Var, heads: int) -> tp.Var:
    *lead, rows, C = x.shape
    x = tp.reshape(x, (*lead, rows, heads, C // heads))
    return tp.swapaxes(x, -2, -3)


def _merge(x: tp.Var) -> tp.Var:
    *lead, heads, rows, hd = x.shape
    return tp.reshape(tp.swapaxes(x, -2, -3), (*lead, rows, heads * hd))


def attend(P, prefix: str, q_in, kv_in, heads: int, mask=None) -> tp.Var:
    """Multi-head attention with separate query and key/value inputs, then output map."""
    q = _heads(q_in @ P[f"{prefix}.wq"], heads)
    k = _heads(kv_in @ P[f"{prefix}.wk"], heads)
    v = _heads(kv_in @ P[f"{prefix}.wv"], heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    w = tp.softmax(q @ tp.swapaxes(k, -1, -2) * scale, mask)
    return _merge(w @ v) @ P[f"{prefix}.wo"]


def norm(P, prefix, x):
    return tp.layer_norm(x, P[f"{prefix}.g"], P[f"{prefix}.b"])


def feed_forward(P, prefix, x):
    h = tp.relu(x @ P[f"{prefix}.w1"] + P[f"{prefix}.b1"])
    return h @ P[f"{prefix}.w2"] + P[f"{prefix}.b2"]


def unit(P, prefix, x, memory, heads, self_mask=None, cross_mask=None):
    """Decoder unit: self-attention, cross-attention to ``memory``, FFN; post-norm residuals."""
    x = norm(P, f"{prefix}.ln1", x + attend(P, f"{prefix}.self", x, x, heads, self_mask))
    x = norm(P, f"{prefix}.ln2", x + attend(P, f"{prefix}.cross", x, memory, heads, cross_mask))
    return norm(P, f"{prefix}.ln3", x + feed_forward(P, f"{prefix}.ffn", x))


# stage 1: learned queries -> compressed long memory


def stage1_queries(P, cfg: ModelConfig) -> tp.Var:
    """Self-attended learned queries; independent of the input stream."""
    Q = P["enc1.queries"]
    return norm(P, "enc1.ln1", Q + attend(P, "enc1.self", Q, Q, cfg.heads))


def stage1_tail(P, queries: tp.Var, attended: tp.Var) -> tp.Var:
    """Residual + norm around the smoothed attention output, then the FFN block."""
    x = norm(P, "enc1.ln2", queries + attended)
    return norm(P, "enc1.ln3", x + feed_forward(P, "enc1.ffn", x))


def encode_stage1(P, cfg: ModelConfig, long_mem) -> tp.Var:
    long_mem = tp._wrap(long_mem)
    if long_mem.shape[-2] == 0:
        raise DataError("empty long memory")
    S = stage1_queries(P, cfg)
    mask = es_log_mask(long_mem.shape[-2], cfg.lam)
    attended = attend(P, "enc1.cross", S, long_mem, cfg.heads, mask)
    return stage1_tail(P, S, attended)


def encode_stage2(P, cfg: ModelConfig, Z) -> tp.Var:
    if cfg.enc_layers == 0:
        return Z
    x = P["enc2.queries"]
    for i in range(cfg.enc_layers):
        x = unit(P, f"enc2.{i}", x, Z, cfg.heads)
    return x


# decoder


@lru_cache(maxsize=64)
def decoder_masks(L: int, L_a: int, n_mem: int, pad: int = 0):
    """Additive masks for the token self-attention and the cross-attention.

    Token i may see short-memory frame j only if j <= i. The first ``pad``
    frames are left padding: hidden from every other token, each sees only
    itself so no row is fully masked.
    """
    T = L + L_a
    i = np.arange(T)[:, None]
    j = np.arange(T)[None, :]
    ok = (j <= i) & ((j >= pad) | (j == i))
    self_mask = np.where(ok, 0.0, NEG_INF)
    cross = np.zeros((T, n_mem + L))
    cross[:, n_mem:] = self_mask[:, :L]
    self_mask.setflags(write=False)
    cross.setflags(write=False)
    return self_mask, cross


@lru_cache(maxsize=16)
def _positions(L: int, L_a: int, C: int):
    table = sinusoidal_embedding(np.arange(L + L_a), C)
    table.setflags(write=False)
    return table


def decode(P, cfg: ModelConfig, Z_enc, short_mem, pad: int = 0) -> tp.Var:
    """Scores for the L short-memory frames followed by the L_a anticipated frames.

    ``Z_enc=None`` runs without long memory: the tokens cross-attend only to
    the embedded short memory.
    """
    short_mem = tp._wrap(short_mem)
    if short_mem.shape[-2] != cfg.L:
        raise DataError(f"short memory has {short_mem.shape[-2]} rows, expected L={cfg.L}")
    omega = _positions(cfg.L, cfg.L_a, cfg.C)
    E = short_mem @ P["embed.w"] + P["embed.b"] + omega[: cfg.L]
    tokens = E
    if cfg.L_a:
        tokens = tp.concat([E, P["antic"] + omega[cfg.L :]], axis=-2)
    n_mem = 0 if Z_enc is None else Z_enc.shape[-2]
    self_mask, cross_mask = decoder_masks(cfg.L, cfg.L_a, n_mem, pad)
    memory = E if Z_enc is None else tp.concat([Z_enc, E], axis=-2)
    x = tokens
    for j in range(cfg.dec_layers):
        x = unit(P, f"dec.{j}", x, memory, cfg.heads, self_mask, cross_mask)
    return x @ P["head.w"] + P["head.b"]


def forward_vars(P, cfg: ModelConfig, features) -> tp.Var:
    features = tp._wrap(features)
    if features.shape[-2] != cfg.clip_length:
        raise DataError(f"clip has {features.shape[-2]} frames, expected N+L={cfg.clip_length}")
    Z_enc = None
    if cfg.long_memory:
        Z = encode_stage1(P, cfg, tp.take(features, slice(0, cfg.N), axis=-2))
        Z_enc = encode_stage2(P, cfg, Z)
    return decode(P, cfg, Z_enc, tp.take(features, slice(cfg.N, None), axis=-2))


def forward_batch(params: ModelParams, features) -> np.ndarray:
    """Logits ``(..., L + L_a, K + 1)`` for one clip or a batch of clips."""
    return forward_vars(as_vars(params), params.config, np.asarray(features, dtype=np.float64)).value


def loss_and_grads(params: ModelParams, features, labels) -> tuple[float, dict]:
    """Mean cross-entropy over every supervised row and its gradient for every tensor.

    ``labels`` has shape ``(..., L + L_a)``: per-frame labels of the short
    memory followed by the anticipation labels.
    """
    cfg = params.config
    labels = np.asarray(labels)
    if labels.shape[-1] != cfg.L + cfg.L_a:
        raise DataError(f"labels have {labels.shape[-1]} columns, expected L+L_a={cfg.L + cfg.L_a}")
    if labels.min() < 0 or labels.max() > cfg.K:
        raise DataError(f"label outside [0, {cfg.K}]")
    tape = tp.Tape()
    P = as_vars(params, tape)
    logits = forward_vars(P, cfg, np.asarray(features, dtype=np.float64))
    loss = tp.cross_entropy(logits, labels)
    tape.backward(loss)
    grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.value)) for k, v in P.items()}
    return float(loss.value), grads


def loss_only(params: ModelParams, features, labels) -> float:
    logits = forward_batch(params, features)
    return float(tp.cross_entropy(logits, np.asarray(labels)).value)
