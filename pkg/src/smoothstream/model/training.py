from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .forward import forward_batch, loss_and_grads
from .params import ModelParams

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class OptimConfig:
    # large for a transformer, but the synthetic task is tiny and 20 epochs must suffice
    lr: float = 7e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 5e-5
    warmup_frac: float = 0.1
    batch_size: int = 16
    steps_per_epoch: int = 50


def learning_rate(step: int, total: int, cfg: OptimConfig) -> float:
    """Linear warm-up from 0 to ``cfg.lr``, then cosine decay to 0."""
    warm = max(1, math.ceil(cfg.warmup_frac * total))
    if step < warm:
        return cfg.lr * (step + 1) / warm
    frac = (step - warm) / max(1, total - warm)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * frac))


class Adam:
    def __init__(self, cfg: OptimConfig):
        self.cfg = cfg
        self.m = {}
        self.v = {}
        self.n = 0

    def update(self, tensors: dict, grads: dict, lr: float):
        c = self.cfg
        self.n += 1
        bc1 = 1 - c.beta1**self.n
        bc2 = 1 - c.beta2**self.n
        for name, p in tensors.items():
            g = grads[name] + c.weight_decay * p
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(params: ModelParams, dataset, optim: OptimConfig, epochs: int, seed: int = 0):
    """Train a copy of ``params`` on clips drawn from ``dataset``.

    ``dataset.sample(rng, batch_size)`` must return ``(features, labels)``
    shaped ``(B, N + L, d)`` and ``(B, L + L_a)``. Returns the trained params
    and one log record per epoch.
    """
    params = params.copy()
    rng = np.random.default_rng(seed)
    opt = Adam(optim)
    total = epochs * optim.steps_per_epoch
    history = []
    step = 0
    for epoch in range(epochs):
        losses = []
        for _ in range(optim.steps_per_epoch):
            feats, labels = dataset.sample(rng, optim.batch_size)
            loss, grads = loss_and_grads(params, feats, labels)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch}, step {step}")
            lr = learning_rate(step, total, optim)
            opt.update(params.tensors, grads, lr)
            losses.append(loss)
            step += 1
        # accuracy over all supervised rows of a fresh batch
        feats, labels = dataset.sample(rng, optim.batch_size)
        accuracy = float((forward_batch(params, feats).argmax(axis=-1) == labels).mean())
        record = {"epoch": epoch, "loss": float(np.mean(losses)), "accuracy": accuracy, "lr": lr}
        log.info("epoch %d loss %.4f acc %.3f", epoch, record["loss"], record["accuracy"])
        history.append(record)
    return params, history
