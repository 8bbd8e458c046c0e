import math

import numpy as np
import pytest

from smoothstream.harness.synth import ClipDataset, SynthConfig, gen_stream
from smoothstream.model import ModelConfig, init_params
from smoothstream.model.training import Adam, OptimConfig, TrainingDiverged, learning_rate, train

CFG = ModelConfig(d=4, C=8, heads=2, M=4, M2=4, enc_layers=1, dec_layers=1, N=16, L=4, L_a=2, K=3)


@pytest.fixture(scope="module")
def dataset():
    synth = SynthConfig(K=3, d=4, T=1500, noise=0.2)
    return ClipDataset([gen_stream(synth, seed=i, source=i) for i in range(2)], CFG)


def test_schedule_shape():
    cfg = OptimConfig(lr=1.0, warmup_frac=0.1)
    rates = [learning_rate(s, 100, cfg) for s in range(100)]
    assert rates[0] == pytest.approx(0.1)
    assert rates[9] == pytest.approx(1.0)
    assert all(a >= b for a, b in zip(rates[9:], rates[10:]))
    assert rates[-1] < 0.01


def test_adam_first_step_is_lr_sized():
    p = {"w": np.array([1.0, -2.0])}
    Adam(OptimConfig(weight_decay=0.0)).update(p, {"w": np.array([3.0, -0.5])}, lr=0.1)
    assert np.allclose(p["w"], [0.9, -1.9], atol=1e-7)


def test_zero_learning_rate_keeps_params(dataset):
    params = init_params(CFG, 0)
    trained, _ = train(params, dataset, OptimConfig(lr=0.0, batch_size=4, steps_per_epoch=3), epochs=1)
    assert all(np.array_equal(trained[k], params[k]) for k in params.tensors)


def test_loss_decreases(dataset):
    _, history = train(init_params(CFG, 1), dataset, OptimConfig(lr=3e-3, batch_size=8, steps_per_epoch=10), epochs=5)
    assert history[-1]["loss"] < history[0]["loss"]
    assert history[0]["loss"] < math.log(CFG.K + 1) + 0.5


def test_same_seed_same_history(dataset):
    opt = OptimConfig(batch_size=4, steps_per_epoch=4)
    a = train(init_params(CFG, 2), dataset, opt, epochs=2, seed=5)
    b = train(init_params(CFG, 2), dataset, opt, epochs=2, seed=5)
    assert a[1] == b[1]
    assert all(np.array_equal(a[0][k], b[0][k]) for k in a[0].tensors)


def test_divergence_is_reported(dataset):
    params = init_params(CFG, 3)
    params.tensors["head.b"][:] = np.nan
    with pytest.raises(TrainingDiverged):
        train(params, dataset, OptimConfig(batch_size=2, steps_per_epoch=1), epochs=1)
