from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import uniform_init
from .config import ModelConfig


@dataclass
class ModelParams:
    """All learned tensors, keyed by dotted name. Shapes follow ``config``."""

    config: ModelConfig
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def size(self) -> int:
        return sum(v.size for v in self.tensors.values())


def _attn(rng, out, prefix, C, kv_dim):
    out[f"{prefix}.wq"] = uniform_init(rng, C, (C, C))
    out[f"{prefix}.wk"] = uniform_init(rng, kv_dim, (kv_dim, C))
    out[f"{prefix}.wv"] = uniform_init(rng, kv_dim, (kv_dim, C))
    out[f"{prefix}.wo"] = uniform_init(rng, C, (C, C))


def _ln(out, prefix, C):
    out[f"{prefix}.g"] = np.ones(C)
    out[f"{prefix}.b"] = np.zeros(C)


def _ffn(rng, out, prefix, C, hidden):
    out[f"{prefix}.w1"] = uniform_init(rng, C, (C, hidden))
    out[f"{prefix}.b1"] = uniform_init(rng, C, (hidden,))
    out[f"{prefix}.w2"] = uniform_init(rng, hidden, (hidden, C))
    out[f"{prefix}.b2"] = uniform_init(rng, hidden, (C,))


def _unit(rng, out, prefix, C, hidden, cross_dim):
    _attn(rng, out, f"{prefix}.self", C, C)
    _ln(out, f"{prefix}.ln1", C)
    _attn(rng, out, f"{prefix}.cross", C, cross_dim)
    _ln(out, f"{prefix}.ln2", C)
    _ffn(rng, out, f"{prefix}.ffn", C, hidden)
    _ln(out, f"{prefix}.ln3", C)


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(seed)
    C, H = cfg.C, cfg.hidden
    t = {}
    t["embed.w"] = uniform_init(rng, cfg.d, (cfg.d, C))
    t["embed.b"] = uniform_init(rng, cfg.d, (C,))
    if cfg.L_a:
        t["antic"] = uniform_init(rng, C, (cfg.L_a, C))
    if cfg.long_memory:
        t["enc1.queries"] = uniform_init(rng, C, (cfg.M, C))
        # the stage-1 cross-attention reads raw d-dim frames
        _unit(rng, t, "enc1", C, H, cfg.d)
        if cfg.enc_layers:
            t["enc2.queries"] = uniform_init(rng, C, (cfg.M2, C))
        for i in range(cfg.enc_layers):
            _unit(rng, t, f"enc2.{i}", C, H, C)
    for j in range(cfg.dec_layers):
        _unit(rng, t, f"dec.{j}", C, H, C)
    t["head.w"] = uniform_init(rng, C, (C, cfg.classes))
    t["head.b"] = uniform_init(rng, C, (cfg.classes,))
    return ModelParams(cfg, t)
