from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from ..attention import decay_for_window
from ..errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the toy detector.

    ``M``/``M2`` are the stage-1/stage-2 query counts, ``L`` the short-memory
    length, ``L_a`` the number of anticipation tokens and ``N`` the
    long-memory training window. ``decay=None`` picks the decay whose weight
    on the oldest window frame is 1e-3.
    """

    d: int = 16
    C: int = 32
    heads: int = 4
    M: int = 16
    M2: int = 16
    enc_layers: int = 2
    dec_layers: int = 2
    L: int = 8
    L_a: int = 4
    N: int = 64
    decay: Optional[float] = None
    K: int = 5
    ffn_mult: int = 4
    long_memory: bool = True

    def __post_init__(self):
        for name in ("d", "C", "heads", "M", "L", "N", "K", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.C % self.heads:
            raise ConfigError(f"C={self.C} is not divisible by heads={self.heads}")
        if self.L_a < 0 or self.enc_layers < 0 or self.dec_layers < 1:
            raise ConfigError("L_a, enc_layers must be >= 0 and dec_layers >= 1")
        if self.enc_layers == 0 and self.M2 != self.M:
            raise ConfigError("enc_layers=0 passes stage-1 output through, so M2 must equal M")
        if self.decay is not None and self.decay < 0:
            raise ConfigError("decay must be >= 0")

    @property
    def lam(self) -> float:
        return decay_for_window(self.N) if self.decay is None else self.decay

    @property
    def classes(self) -> int:
        return self.K + 1

    @property
    def hidden(self) -> int:
        return self.ffn_mult * self.C

    @property
    def clip_length(self) -> int:
        return self.N + self.L


def coerce_fields(cls, raw: dict) -> dict:
    """Convert string values from a key=value file to the dataclass field types."""
    out = {}
    known = {f.name: f for f in fields(cls)}
    for key, value in raw.items():
        if key not in known:
            continue
        default = known[key].default
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("none", ""):
                value = None
            elif isinstance(default, bool):
                value = low in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                value = int(value)
            else:
                value = float(value)
        out[key] = value
    return out
