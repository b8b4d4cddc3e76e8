"""Layer stack: shape rules, phase shuffle semantics, input_gradient."""

import numpy as np
import pytest

from escaug.nn import layers as L
from escaug.nn import tensor as T
from escaug.nn.tensor import Tensor
from escaug.nn.gradcheck import numerical_grad, max_rel_error


def test_same_stride_pad_splits():
    # total pad k - s, split floor-left / ceil-right
    assert L.same_stride_pad(25, 3) == (11, 11)
    assert L.same_stride_pad(25, 4) == (10, 11)
    assert L.same_stride_pad(4, 4) == (0, 0)


def test_dense_shapes_and_init_bounds(rng):
    d = L.Dense(10, 4)
    d.init(rng, np.float64)
    assert d.out_shape((10,)) == (4,)
    r = np.sqrt(6.0 / (10 + 4))
    assert np.abs(d.w.data).max() <= r and d.b.data.max() == 0.0


def test_conv1d_layer_same_length(rng):
    conv = L.Conv1d(3, 8, 25, 4, L.same_stride_pad(25, 4))
    assert conv.out_shape((64, 3)) == (16, 8)


def test_network_rejects_bad_chain():
    with pytest.raises(ValueError):
        L.Network([("d", L.Dense(5, 3)), ("d2", L.Dense(4, 2))], in_shape=(5,))


def test_phase_shuffle_window_and_content(rng):
    ps = L.PhaseShuffle(2)
    x = rng.normal(size=(64, 40, 3))
    out = ps.forward(Tensor(x), rng=rng).data
    assert out.shape == x.shape
    # every output sample must come from the input (reflection indexing)
    for b in range(4):
        diffs = [np.abs(out[b] - np.roll(x[b], r, axis=0)).max() for r in range(-2, 3)]
    # each item is some shift of the source rows except at reflected edges:
    # check values are drawn from the original sample set
    assert np.isin(np.round(out[0], 12), np.round(x[0], 12)).all()


def test_phase_shuffle_needs_rng_and_identity_at_zero(rng):
    x = Tensor(rng.normal(size=(2, 10, 1)))
    with pytest.raises(ValueError):
        L.PhaseShuffle(2).forward(x)
    out = L.PhaseShuffle(0).forward(x, rng=rng)
    assert np.array_equal(out.data, x.data)


def test_phase_shuffle_backward_is_exact_transpose(rng):
    # FD on a fixed shuffle draw: freeze rng state per evaluation
    x = Tensor(rng.normal(size=(3, 12, 2)), requires_grad=True)
    ps = L.PhaseShuffle(2)

    def f():
        r = np.random.default_rng(1234)
        return T.sum_(T.pow_const(ps.forward(x, rng=r), 2))

    loss = f()
    loss.backward()
    num = numerical_grad(lambda: float(f().data), x)
    assert max_rel_error(x.grad, num) < 1e-7


def test_dropout_scaling_and_inference(rng):
    drop = L.Dropout(0.5)
    x = Tensor(np.ones((4, 1000)))
    out = drop.forward(x, training=True, rng=rng).data
    kept = out[out != 0]
    assert np.allclose(kept, 2.0)                       # inverted scaling
    assert 0.35 < (out != 0).mean() < 0.65
    same = drop.forward(x, training=False)
    assert same is x                                    # inference identity


def test_network_forward_trace(rng):
    net = L.Network([("d", L.Dense(6, 4)), ("r", L.Relu())], in_shape=(6,))
    net.init(rng, np.float64)
    trace = []
    net.forward(Tensor(rng.normal(size=(2, 6))), trace=trace)
    assert trace == [("input", (2, 6)), ("d", (2, 4)), ("r", (2, 4))]


def _tiny_critic(rng, dtype=np.float64):
    net = L.Network([
        ("conv1", L.Conv1d(1, 3, 5, 3, L.same_stride_pad(5, 3))),
        ("lrelu1", L.LeakyRelu(0.2)),
        ("shuffle1", L.PhaseShuffle(2)),
        ("conv2", L.Conv1d(3, 4, 5, 4, L.same_stride_pad(5, 4))),
        ("lrelu2", L.LeakyRelu(0.2)),
        ("shuffle2", L.PhaseShuffle(2)),
        ("flatten", L.Flatten()),
        ("score", L.Dense(32, 1)),
    ], in_shape=(96, 1))
    return net.init(rng, dtype)


def test_input_gradient_matches_backward(rng):
    net = _tiny_critic(rng)
    x = rng.normal(size=(5, 96, 1))
    # same shuffle draws for both paths
    xt = Tensor(x.copy(), requires_grad=True)
    out = net.forward(xt, rng=np.random.default_rng(7))
    T.sum_(out).backward()
    g_expr = net.input_gradient(Tensor(x.copy()), rng=np.random.default_rng(7))
    assert np.abs(g_expr.data - xt.grad).max() < 1e-12


def test_input_gradient_backprops_into_weights(rng):
    # d/dW of a function of dD/dx checked against finite differences
    net = _tiny_critic(rng)
    x = rng.normal(size=(4, 96, 1))
    params = dict(net.params())
    w = params["conv2.w"]

    def penalty():
        g = net.input_gradient(Tensor(x.copy()), rng=np.random.default_rng(3))
        sq = T.add(T.sum_(T.mul(g, g), axis=(1, 2)), Tensor(np.asarray(1e-24)))
        dev = T.sub(T.sqrt(sq), Tensor(np.asarray(1.0)))
        return T.mean_(T.mul(dev, dev))

    loss = penalty()
    net.zero_grad()
    loss.backward()
    analytic = w.grad.copy()
    num = numerical_grad(lambda: float(penalty().data), w)
    assert max_rel_error(analytic, num) < 1e-6


def test_input_gradient_requires_scalar_output(rng):
    net = L.Network([("d", L.Dense(4, 2))], in_shape=(4,))
    net.init(rng, np.float64)
    with pytest.raises(ValueError):
        net.input_gradient(Tensor(rng.normal(size=(1, 4))))
