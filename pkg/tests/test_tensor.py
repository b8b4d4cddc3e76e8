"""Autodiff engine: per-op gradient checks and graph semantics."""

import numpy as np
import pytest

from escaug.nn import tensor as T
from escaug.nn.tensor import Tensor, no_grad
from escaug.nn.gradcheck import check_scalar_fn, numerical_grad, max_rel_error

TOL = 1e-7


def _t(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_add_mul_broadcast(rng):
    a = _t(rng, 3, 4)
    b = _t(rng, 4)
    err = check_scalar_fn(lambda: T.sum_(T.mul(T.add(a, b), a)), [a, b])
    assert err < TOL


def test_div_pow_sqrt(rng):
    a = Tensor(rng.uniform(0.5, 2.0, (5,)), requires_grad=True)
    b = Tensor(rng.uniform(0.5, 2.0, (5,)), requires_grad=True)
    err = check_scalar_fn(
        lambda: T.sum_(T.add(T.div(a, b), T.mul(T.pow_const(a, 3), T.sqrt(b)))), [a, b])
    assert err < TOL


def test_exp_log_tanh(rng):
    a = Tensor(rng.uniform(0.1, 1.5, (4, 3)), requires_grad=True)
    err = check_scalar_fn(lambda: T.sum_(T.add(T.exp(T.tanh(a)), T.log(a))), [a])
    assert err < TOL


def test_relu_leaky(rng):
    a = _t(rng, 6, 5)
    err = check_scalar_fn(lambda: T.sum_(T.add(T.relu(a), T.leaky_relu(a, 0.2))), [a])
    assert err < 1e-6


def test_matmul(rng):
    a = _t(rng, 3, 4)
    b = _t(rng, 4, 2)
    err = check_scalar_fn(lambda: T.sum_(T.matmul(a, b)), [a, b])
    assert err < TOL


def test_mean_axes(rng):
    a = _t(rng, 2, 3, 4)
    err = check_scalar_fn(lambda: T.sum_(T.mean_(a, axis=(1, 2))), [a])
    assert err < TOL


def test_reshape_swap_flip_slice(rng):
    a = _t(rng, 2, 6, 2)
    err = check_scalar_fn(
        lambda: T.sum_(T.slice_time(T.swapaxes(T.reshape(a, (2, 3, 4)), 1, 2), 1, 2)), [a])
    assert err < TOL
    b = _t(rng, 5, 3)
    err = check_scalar_fn(lambda: T.sum_(T.mul(T.flip0(b), b)), [b])
    assert err < TOL


def test_pad_zero_insert(rng):
    a = _t(rng, 2, 5, 3)
    err = check_scalar_fn(
        lambda: T.sum_(T.mul(T.pad_time(a, 2, 1), T.pad_time(a, 2, 1))), [a])
    assert err < TOL
    err = check_scalar_fn(lambda: T.sum_(T.pow_const(T.zero_insert_time(a, 3), 2)), [a])
    assert err < TOL


def test_take_scatter_transpose_pair(rng):
    # <take(x, idx), y> must equal <x, scatter(y, idx)>
    x = rng.normal(size=(2, 7, 3))
    idx = rng.integers(0, 7, size=(2, 11))
    y = rng.normal(size=(2, 11, 3))
    tx = Tensor(x, requires_grad=True)
    ty = Tensor(y, requires_grad=True)
    lhs = float(T.sum_(T.mul(T.take_time(tx, idx), Tensor(y))).data)
    rhs = float(T.sum_(T.mul(Tensor(x), T.scatter_time(ty, idx, 7))).data)
    assert abs(lhs - rhs) < 1e-10
    err = check_scalar_fn(lambda: T.sum_(T.pow_const(T.take_time(tx, idx), 2)), [tx])
    assert err < TOL
    err = check_scalar_fn(lambda: T.sum_(T.pow_const(T.scatter_time(ty, idx, 7), 2)), [ty])
    assert err < TOL


def test_conv1d_strides_pads(rng):
    for stride, pad in [(1, (0, 0)), (2, (1, 1)), (3, (2, 1)), (4, (1, 2))]:
        x = _t(rng, 2, 12, 3)
        w = _t(rng, 5, 3, 4)          # (kernel, c_in, c_out)
        b = _t(rng, 4)
        err = check_scalar_fn(
            lambda: T.sum_(T.pow_const(T.conv1d(x, w, b, stride=stride, pad=pad), 2)),
            [x, w, b])
        assert err < 1e-6, (stride, pad)


def test_conv1d_identity_kernel(rng):
    x = rng.normal(size=(1, 6, 1))
    w = np.ones((1, 1, 1))
    out = T.conv1d(Tensor(x), Tensor(w), stride=1, pad=(0, 0))
    assert np.allclose(out.data, x)


def test_tconv1d_lengths_and_zero_insertion(rng):
    # stride-s output is exactly s times the input length
    for L, s, k in [(5, 4, 9), (6, 3, 25), (4, 2, 4), (7, 1, 3)]:
        x = Tensor(rng.normal(size=(2, L, 3)))
        w = Tensor(rng.normal(size=(k, 3, 4)))
        out = T.tconv1d(x, w, stride=s)
        assert out.data.shape == (2, L * s, 4), (L, s, k)
    # k=1 kernel reduces to pure zero insertion scaled by the kernel
    x = rng.normal(size=(1, 4, 1))
    w = np.array([[[2.0]]])
    out = T.tconv1d(Tensor(x), Tensor(w), stride=3).data[0, :, 0]
    expect = np.zeros(12)
    expect[::3] = 2.0 * x[0, :, 0]
    assert np.allclose(out, expect)


def test_tconv1d_grad(rng):
    x = _t(rng, 2, 5, 2)
    w = _t(rng, 7, 2, 3)              # (kernel, c_in, c_out)
    b = _t(rng, 3)
    err = check_scalar_fn(
        lambda: T.sum_(T.pow_const(T.tconv1d(x, w, b, stride=4), 2)), [x, w, b])
    assert err < 1e-6


def test_conv2d_grad(rng):
    x = _t(rng, 2, 6, 5, 2)
    w = _t(rng, 3, 3, 2, 4)
    b = _t(rng, 4)
    err = check_scalar_fn(
        lambda: T.sum_(T.pow_const(T.conv2d(x, w, b, pad=(1, 1)), 2)), [x, w, b])
    assert err < 1e-6


def test_maxpool2d_forward_and_grad(rng):
    x = np.arange(16, dtype=np.float64).reshape(1, 4, 4, 1)
    out = T.maxpool2d(Tensor(x), 2, 2)
    assert np.array_equal(out.data[0, :, :, 0], [[5, 7], [13, 15]])
    xt = _t(rng, 2, 4, 6, 3)
    err = check_scalar_fn(lambda: T.sum_(T.pow_const(T.maxpool2d(xt, 4, 2), 2)), [xt])
    assert err < 1e-6


def test_softmax_rows_and_grad(rng):
    a = _t(rng, 4, 7)
    s = T.softmax(a)
    assert np.allclose(s.data.sum(axis=1), 1.0)
    err = check_scalar_fn(lambda: T.sum_(T.pow_const(T.softmax(a), 2)), [a])
    assert err < 1e-6


def test_cross_entropy_matches_manual(rng):
    logits = rng.normal(size=(5, 3))
    onehot = np.eye(3)[rng.integers(0, 3, 5)]
    ce = T.cross_entropy_logits(Tensor(logits), onehot)
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    manual = -np.log(p[np.arange(5), onehot.argmax(axis=1)]).mean()
    assert abs(float(ce.data) - manual) < 1e-12
    lt = Tensor(logits, requires_grad=True)
    err = check_scalar_fn(lambda: T.cross_entropy_logits(lt, onehot), [lt])
    assert err < 1e-6


def test_backward_requires_scalar(rng):
    a = _t(rng, 3)
    with pytest.raises(ValueError):
        T.mul(a, a).backward()


def test_grad_accumulates_across_uses(rng):
    a = Tensor(np.array([2.0]), requires_grad=True)
    loss = T.sum_(T.add(T.mul(a, a), a))     # d/da (a^2 + a) = 2a + 1 = 5
    loss.backward()
    assert np.allclose(a.grad, [5.0])


def test_no_grad_blocks_graph(rng):
    a = _t(rng, 3)
    with no_grad():
        out = T.mul(a, a)
    assert out._backward is None and out.requires_grad is False


def test_fd_agreement_on_composite(rng):
    # one deep composite graph against raw finite differences
    x = Tensor(rng.normal(size=(2, 8, 2)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 2, 3)), requires_grad=True)

    def f():
        h = T.leaky_relu(T.conv1d(x, w, stride=2, pad=(1, 1)), 0.2)
        return T.mean_(T.pow_const(h, 2))

    loss = f()
    loss.backward()
    for t in (x, w):
        num = numerical_grad(lambda: float(f().data), t)
        assert max_rel_error(t.grad, num) < 1e-7
