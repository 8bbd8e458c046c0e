"""Oracle-equivalence suites runnable from the CLI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..attention import AttentionConfig, Box, Constant, Laplace, ProjectionWeights, es_attention_windowed, kernel_attention, softmax_attention
from ..model import ModelConfig, forward_batch, init_params, loss_and_grads, run_stream
from ..model.forward import loss_only
from ..numerics import finite_diff_grad
from ..streaming import EsMode, FifoMode, StreamState

DENOMINATOR_NOTICE = (
    "note: the FIFO denominator psi is a scalar per (query, head); each update adds the frame's "
    "kernel value (not kernel * value) and subtracts the evicted frame's kernel value"
)


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


@dataclass
class SuiteResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error) and self.max_error <= self.tolerance)


def _instance(rng, N, d=6, C=8, heads=2, M=3):
    cfg = AttentionConfig(d, C, heads)
    proj = ProjectionWeights.random(rng, d, C)
    return cfg, proj, rng.normal(size=(M, C)), rng.normal(size=(N, d))


def suite_softmax_vs_kernel(instances=100, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cfg, proj, Q, X = _instance(rng, int(rng.integers(1, 65)))
        a = softmax_attention(Q, proj.keys(X), proj.values(X), cfg)
        b = np.stack([kernel_attention(q, X, proj, cfg) for q in Q])
        worst = max(worst, rel_err(a, b))
    return SuiteResult("softmax attention vs kernel form", worst, 1e-10)


def suite_fifo(seeds=5, N=8) -> SuiteResult:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        cfg, proj, Q, X = _instance(rng, 3 * N)
        state = StreamState(Q, proj, FifoMode(N), cfg.heads)
        for t in range(3 * N):
            state.push(X[t])
            ref = np.stack([kernel_attention(q, X[: t + 1], proj, cfg, Box(N)) for q in Q])
            worst = max(worst, rel_err(state.read(), ref))
    return SuiteResult("FIFO stream vs box-kernel brute force", worst, 1e-9)


def suite_es_windowed(seeds=5, N=128, decay=0.05) -> SuiteResult:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(100 + seed)
        cfg, proj, Q, X = _instance(rng, N)
        state = StreamState(Q, proj, EsMode(decay), cfg.heads)
        for x in X:
            state.push(x)
        ref = es_attention_windowed(Q, proj.keys(X), proj.values(X), decay, cfg)
        worst = max(worst, rel_err(state.read(), ref))
        brute = np.stack([kernel_attention(q, X, proj, cfg, Laplace(decay)) for q in Q])
        worst = max(worst, rel_err(state.read(), brute))
    return SuiteResult("ES stream vs windowed matrix form", worst, 1e-9)


def suite_es_zero_decay(T=512, seed=0) -> SuiteResult:
    rng = np.random.default_rng(200 + seed)
    cfg, proj, Q, X = _instance(rng, T)
    state = StreamState(Q, proj, EsMode(0.0), cfg.heads)
    worst = 0.0
    for t, x in enumerate(X):
        state.push(x)
        if (t + 1) % 64 == 0:
            ref = np.stack([kernel_attention(q, X[: t + 1], proj, cfg, Constant()) for q in Q])
            worst = max(worst, rel_err(state.read(), ref))
    return SuiteResult("ES decay=0 vs unwindowed kernel attention", worst, 1e-9)


def tiny_config(**kw) -> ModelConfig:
    base = dict(d=4, C=8, heads=2, M=4, M2=4, enc_layers=1, dec_layers=1, N=16, L=4, L_a=2, K=3)
    base.update(kw)
    return ModelConfig(**base)


def suite_batch_stream(seeds=3) -> SuiteResult:
    worst = 0.0
    for seed in range(seeds):
        # oldest window weight exp(-decay * (N - 1)) = 1e-7
        cfg = tiny_config(decay=np.log(1e7) / 15)
        params = init_params(cfg, seed)
        X = np.random.default_rng(300 + seed).normal(size=(cfg.clip_length, cfg.d))
        batch = forward_batch(params, X)
        stream = run_stream(params, X)[-1]
        worst = max(worst, float(np.abs(batch[cfg.L - 1 :] - stream).max()))
    return SuiteResult("model batch vs stream logits (abs)", worst, 1e-5)


def suite_gradients(seed=0) -> SuiteResult:
    cfg = tiny_config()
    params = init_params(cfg, seed)
    rng = np.random.default_rng(400 + seed)
    X = rng.normal(size=(2, cfg.clip_length, cfg.d))
    y = rng.integers(0, cfg.K + 1, size=(2, cfg.L + cfg.L_a))
    _, grads = loss_and_grads(params, X, y)
    fd = finite_diff_grad(lambda _: loss_only(params, X, y), params.tensors)
    worst = max(float(np.linalg.norm(grads[k] - fd[k]) / max(np.linalg.norm(fd[k]), 1e-12)) for k in fd)
    return SuiteResult("tape vs finite-difference gradients", worst, 1e-3)


SUITES = (
    suite_softmax_vs_kernel,
    suite_fifo,
    suite_es_windowed,
    suite_es_zero_decay,
    suite_batch_stream,
    suite_gradients,
)


def selftest(echo=print) -> bool:
    echo(DENOMINATOR_NOTICE)
    ok = True
    for suite in SUITES:
        r = suite()
        ok &= r.passed
        echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: max error {r.max_error:.3e} (tol {r.tolerance:.0e})")
    echo("all suites passed" if ok else "selftest FAILED")
    return ok
