"""Per-frame cost of the long-memory stage: streaming ES/FIFO vs sliding-window attention."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ..attention import ProjectionWeights, decay_for_window
from ..streaming import EsMode, FifoMode, StreamState, WindowedAttention, per_frame_cost_probe

log = logging.getLogger(__name__)

MODES = ("stream-es", "stream-fifo", "windowed")
CSV_HEADER = ("mode", "window", "frames", "median_ns", "p95_ns")


@dataclass(frozen=True)
class BenchConfig:
    windows: tuple = (32, 128, 512, 2048, 8192)
    modes: tuple = MODES
    frames: int = 20000
    reps: int = 3
    d: int = 64
    C: int = 64
    M: int = 16
    heads: int = 4
    seed: int = 0


@dataclass(frozen=True)
class BenchRow:
    mode: str
    window: int
    frames: int
    median_ns: float
    p95_ns: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def median(self, mode: str, window: int) -> float:
        for r in self.rows:
            if r.mode == mode and r.window == window:
                return r.median_ns
        raise KeyError((mode, window))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r.mode, r.window, r.frames, f"{r.median_ns:.1f}", f"{r.p95_ns:.1f}"])


def bench_workload(cfg: BenchConfig, n_frames: int):
    """Queries, projections and frames; depends only on ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    queries = rng.normal(size=(cfg.M, cfg.C))
    proj = ProjectionWeights.random(rng, cfg.d, cfg.C)
    frames = rng.normal(size=(n_frames, cfg.d))
    return queries, proj, frames


def make_state(mode: str, window: int, queries, proj, heads: int):
    if mode == "stream-es":
        return StreamState(queries, proj, EsMode(decay_for_window(window)), heads)
    if mode == "stream-fifo":
        return StreamState(queries, proj, FifoMode(window), heads)
    if mode == "windowed":
        return WindowedAttention(queries, proj, window, heads)
    raise ValueError(f"unknown bench mode {mode!r}")


def run_benchmark(cfg: BenchConfig = BenchConfig()) -> BenchReport:
    """Time push + read per frame for each (mode, window).

    Each state is first filled with ``window`` frames so that the timed
    frames run at steady state; ``cfg.frames`` timed frames are split over
    ``cfg.reps`` passes after one untimed warm-up pass.
    """
    if not cfg.windows:
        raise ValueError("window list is empty")
    chunk = max(1, cfg.frames // cfg.reps)
    report = BenchReport()
    with threadpool_limits(limits=1):
        for window in cfg.windows:
            queries, proj, frames = bench_workload(cfg, window + chunk)
            fill, timed = frames[:window], frames[window:]
            for mode in cfg.modes:
                state = make_state(mode, window, queries, proj, cfg.heads)
                for x in fill:
                    state.push(x)
                stats = per_frame_cost_probe(state, timed, reps=cfg.reps)
                report.rows.append(BenchRow(mode, window, stats.samples, stats.median_ns, stats.p95_ns))
                log.info("%-12s window %5d median %.0f ns p95 %.0f ns", mode, window, stats.median_ns, stats.p95_ns)
    return report
