import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothstream import tape as tp
from smoothstream.numerics import finite_diff_grad, layer_norm, softmax_rows


def _check(build, shapes, seed, tol=1e-3):
    """Tape gradient of a scalar-valued build(vars) vs central differences."""
    r = np.random.default_rng(seed)
    params = {k: r.normal(size=s) for k, s in shapes.items()}

    def loss(P):
        return float(build({k: tp.Var(v) for k, v in P.items()}).value)

    t = tp.Tape()
    V = {k: t.param(v) for k, v in params.items()}
    t.backward(build(V))
    fd = finite_diff_grad(loss, params)
    for k in params:
        err = np.linalg.norm(V[k].grad - fd[k]) / max(np.linalg.norm(fd[k]), 1e-12)
        assert err <= tol, (k, err)


# a fixed random projection turns tensor outputs into a scalar loss
def _proj(x):
    w = np.random.default_rng(99).normal(size=x.shape)
    return tp.total(x * w)


OPS = {
    "matmul": (lambda V: _proj(V["a"] @ V["b"]), {"a": (3, 4), "b": (4, 2)}),
    "batched_matmul": (lambda V: _proj(V["a"] @ V["b"]), {"a": (2, 3, 4), "b": (4, 2)}),
    "add_broadcast": (lambda V: _proj(V["a"] + V["b"]), {"a": (3, 4), "b": (4,)}),
    "mul": (lambda V: _proj(V["a"] * V["b"]), {"a": (3, 4), "b": (3, 4)}),
    "relu": (lambda V: _proj(tp.relu(V["a"])), {"a": (5, 4)}),
    "softmax": (lambda V: _proj(tp.softmax(V["a"])), {"a": (3, 5)}),
    "softmax_masked": (lambda V: _proj(tp.softmax(V["a"], np.triu(np.full((4, 4), -np.inf), 1))), {"a": (4, 4)}),
    "layer_norm": (lambda V: _proj(tp.layer_norm(V["a"], V["g"], V["b"])), {"a": (3, 6), "g": (6,), "b": (6,)}),
    "concat": (lambda V: _proj(tp.concat([V["a"], V["b"]], axis=-2)), {"a": (2, 3, 4), "b": (1, 4)}),
    "take": (lambda V: _proj(tp.take(V["a"], slice(1, 3), axis=-2)), {"a": (2, 4, 3)}),
    "reshape_swap": (lambda V: _proj(tp.swapaxes(tp.reshape(V["a"], (3, 2, 2)), 0, 1)), {"a": (3, 4)}),
    "cross_entropy": (lambda V: tp.cross_entropy(V["a"], np.array([[0, 2], [1, 1]])), {"a": (2, 2, 3)}),
}


@pytest.mark.parametrize("name", sorted(OPS))
@pytest.mark.parametrize("seed", range(20))
def test_primitive_gradients(name, seed):
    build, shapes = OPS[name]
    _check(build, shapes, seed)


def test_values_match_reference_ops(rng):
    x = rng.normal(size=(3, 5))
    assert np.allclose(tp.softmax(x).value, softmax_rows(x))
    g, b = rng.normal(size=5), rng.normal(size=5)
    assert np.allclose(tp.layer_norm(x, g, b).value, layer_norm(x, g, b))


def test_backward_visits_each_op_once(rng):
    t = tp.Tape()
    a = t.param(rng.normal(size=(2, 3)))
    b = t.param(rng.normal(size=(3, 2)))
    loss = tp.total(tp.relu(a @ b) * 2.0)
    assert t.backward(loss) == len(t.nodes) == 4


def test_untaped_ops_record_nothing(rng):
    x = tp.Var(rng.normal(size=(2, 2)))
    y = tp.softmax(x @ x)
    assert y.tape is None


def test_cross_entropy_uniform_is_log_classes():
    ce = tp.cross_entropy(np.zeros((4, 6)), np.array([0, 1, 2, 5]))
    assert float(ce.value) == pytest.approx(np.log(6), abs=1e-15)


def test_backward_requires_scalar():
    t = tp.Tape()
    with pytest.raises(ValueError):
        t.backward(t.param(np.ones(3)) * 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_composed_graph_gradient(seed):
    def build(V):
        h = tp.layer_norm(tp.relu(V["x"] @ V["w"]), V["g"], V["b"])
        return tp.cross_entropy(tp.softmax(h) @ V["u"], np.array([0, 1, 2]))

    _check(build, {"x": (3, 4), "w": (4, 5), "g": (5,), "b": (5,), "u": (5, 3)}, seed)
