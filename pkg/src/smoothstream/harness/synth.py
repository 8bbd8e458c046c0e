"""Synthetic untrimmed streams with labeled action instances."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..augment import ActionInstance, InstanceBank, mixclip
from ..errors import ConfigError
from ..model.config import ModelConfig


@dataclass(frozen=True)
class SynthConfig:
    """Event frames are ``prototype[label] + drift + noise``; background frames ``drift + noise``.

    Prototypes depend only on ``proto_seed`` so that streams generated with
    different seeds share the same classes. ``drift`` is the per-frame step of
    a random walk added to every frame.
    """

    K: int = 5
    d: int = 16
    T: int = 10000
    event_rate: float = 1 / 50
    dur_min: int = 16
    dur_max: int = 40
    gap_min: int = 4
    noise: float = 0.3
    drift: float = 0.0
    proto_seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.K < 1 or self.d < 1:
            raise ConfigError("T, K and d must be >= 1")
        if self.noise < 0 or self.drift < 0:
            raise ConfigError("noise and drift must be >= 0")
        if not 1 <= self.dur_min <= self.dur_max:
            raise ConfigError("durations must satisfy 1 <= dur_min <= dur_max")
        if self.gap_min < 0 or self.event_rate < 0:
            raise ConfigError("gap_min and event_rate must be >= 0")

    def prototypes(self) -> np.ndarray:
        return np.random.default_rng(self.proto_seed).normal(size=(self.K, self.d))


@dataclass
class LabeledStream:
    features: np.ndarray
    labels: np.ndarray
    instances: list
    source: object = None

    def __len__(self):
        return self.features.shape[0]


def labels_from_instances(instances, T: int) -> np.ndarray:
    labels = np.zeros(T, dtype=np.int64)
    for inst in instances:
        labels[inst.start : inst.end] = inst.label
    return labels


def instances_from_labels(labels) -> list:
    out = []
    labels = np.asarray(labels)
    t = 0
    while t < len(labels):
        if labels[t]:
            s = t
            while t < len(labels) and labels[t] == labels[s]:
                t += 1
            out.append(ActionInstance(s, t, int(labels[s])))
        else:
            t += 1
    return out


def _layout(cfg: SynthConfig, rng: np.random.Generator) -> list:
    n = int(round(cfg.event_rate * cfg.T))
    durations = rng.integers(cfg.dur_min, cfg.dur_max + 1, size=n)
    # every event is preceded by at least gap_min background frames
    while n and durations[:n].sum() + n * cfg.gap_min > cfg.T:
        n -= 1
    if n < len(durations):
        warnings.warn(f"only {n} of {len(durations)} events fit in T={cfg.T}; reducing the event count")
    durations = durations[:n]
    free = cfg.T - int(durations.sum()) - n * cfg.gap_min
    cuts = np.sort(rng.integers(0, free + 1, size=n))
    extra = np.diff(np.concatenate([[0], cuts]))
    labels = rng.integers(1, cfg.K + 1, size=n)
    instances, cursor = [], 0
    for dur, ext, lab in zip(durations, extra, labels):
        start = cursor + cfg.gap_min + int(ext)
        instances.append(ActionInstance(start, start + int(dur), int(lab)))
        cursor = start + int(dur)
    return instances


def gen_stream(cfg: SynthConfig, seed: int, source=None) -> LabeledStream:
    rng = np.random.default_rng(seed)
    instances = _layout(cfg, rng)
    labels = labels_from_instances(instances, cfg.T)
    x = rng.normal(scale=cfg.noise, size=(cfg.T, cfg.d)) if cfg.noise > 0 else np.zeros((cfg.T, cfg.d))
    if cfg.drift > 0:
        x += np.cumsum(rng.normal(scale=cfg.drift, size=(cfg.T, cfg.d)), axis=0)
    protos = cfg.prototypes()
    active = labels > 0
    x[active] += protos[labels[active] - 1]
    return LabeledStream(x, labels, instances, seed if source is None else source)


class ClipDataset:
    """Random training clips ``(N + L frames, L + L_a labels)`` from a set of streams.

    With ``p_mc > 0`` the long-memory part of every clip goes through MixClip,
    drawing donors from the other streams.
    """

    def __init__(self, streams, cfg: ModelConfig, p_mc: float = 0.0):
        self.streams = list(streams)
        self.cfg = cfg
        self.p_mc = p_mc
        need = cfg.N + cfg.L + cfg.L_a
        for s in self.streams:
            if len(s) < need:
                raise ConfigError(f"stream of {len(s)} frames is shorter than a clip ({need})")
        self.bank = InstanceBank.from_sequences((s.source, s.features, s.instances) for s in self.streams) if p_mc > 0 else None

    def clip(self, stream: LabeledStream, end: int, rng=None):
        """Clip whose last short-memory frame is ``end``."""
        cfg = self.cfg
        first = end - cfg.N - cfg.L + 1
        feats = stream.features[first : end + 1]
        labels = stream.labels[end - cfg.L + 1 : end + 1 + cfg.L_a]
        if self.p_mc > 0 and rng is not None:
            lo, hi = first, first + cfg.N
            inside = [
                ActionInstance(max(i.start, lo) - lo, min(i.end, hi) - lo, i.label)
                for i in stream.instances
                if i.end > lo and i.start < hi
            ]
            long_part = mixclip(feats[: cfg.N], inside, self.bank, self.p_mc, rng, source=stream.source)
            feats = np.concatenate([long_part, feats[cfg.N :]])
        return feats, labels

    def sample(self, rng: np.random.Generator, batch: int):
        cfg = self.cfg
        feats, labels = [], []
        for _ in range(batch):
            s = self.streams[rng.integers(len(self.streams))]
            end = int(rng.integers(cfg.N + cfg.L - 1, len(s) - cfg.L_a))
            f, y = self.clip(s, end, rng)
            feats.append(f)
            labels.append(y)
        return np.stack(feats), np.stack(labels)
