"""MixClip: swap action instances in the long-memory span for same-label
instances taken from other sequences."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ActionInstance:
    """Frames ``[start, end)`` carry action ``label`` (never background, 0)."""

    start: int
    end: int
    label: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise DataError(f"bad instance span [{self.start}, {self.end})")
        if self.label < 1:
            raise DataError("background (label 0) does not form instances")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Segment:
    features: np.ndarray
    source: object


class InstanceBank:
    """Donor segments grouped by label, each tagged with the sequence it came from."""

    def __init__(self):
        self._by_label = defaultdict(list)

    def add(self, label: int, features, source) -> None:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise DataError("donor segments need at least one frame")
        self._by_label[label].append(Segment(features, source))

    def donors(self, label: int, exclude_source=None) -> list:
        return [s for s in self._by_label.get(label, ()) if exclude_source is None or s.source != exclude_source]

    def labels(self):
        return sorted(self._by_label)

    def __len__(self):
        return sum(len(v) for v in self._by_label.values())

    @classmethod
    def from_sequences(cls, sequences) -> "InstanceBank":
        """Harvest every instance of ``(source, features, instances)`` triples."""
        bank = cls()
        for source, features, instances in sequences:
            for inst in instances:
                bank.add(inst.label, features[inst.start : inst.end], source)
        return bank


def check_instances(instances, length: int) -> None:
    prev_end = 0
    for inst in instances:
        if inst.start < prev_end:
            raise DataError("instances must be sorted and non-overlapping")
        if inst.end > length:
            raise DataError(f"instance [{inst.start}, {inst.end}) runs past {length} frames")
        prev_end = inst.end


def mixclip(features, instances, bank: InstanceBank, p_mc: float, rng: np.random.Generator, source=None, return_count: bool = False):
    """Replace each instance independently with probability ``p_mc``.

    A longer donor is randomly cropped to the span; a shorter donor is written
    at the span start and the rest of the span keeps its original frames, so
    the sequence length never changes. Instances whose label has no donor
    from a different ``source`` are left alone.
    """
    if not 0.0 <= p_mc <= 1.0:
        raise ValueError("p_mc must lie in [0, 1]")
    features = np.asarray(features, dtype=np.float64)
    check_instances(instances, features.shape[0])
    out = features.copy()
    replaced = 0
    for inst in instances:
        if rng.random() >= p_mc:
            continue
        pool = bank.donors(inst.label, exclude_source=source)
        if not pool:
            continue
        donor = pool[rng.integers(len(pool))].features
        span = inst.length
        if donor.shape[0] >= span:
            off = rng.integers(donor.shape[0] - span + 1)
            out[inst.start : inst.end] = donor[off : off + span]
        else:
            out[inst.start : inst.start + donor.shape[0]] = donor
        replaced += 1
    return (out, replaced) if return_count else out
