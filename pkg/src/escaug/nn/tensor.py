"""Reverse-mode automatic differentiation over numpy arrays.

Tensors wrap float32/float64 ndarrays and record a tape of backward
closures.  Calling ``backward()`` on a scalar walks the tape in reverse
topological order and accumulates gradients into ``.grad`` (plain
ndarrays).  Gradients accumulate across calls until ``zero_grad``.
"""

from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()

    # -- bookkeeping -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def backward(self):
        """Backpropagate from a scalar.  Grads accumulate into ``.grad``."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        seed = np.ones_like(self.data)
        _accum(self, seed)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ----------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_const(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _wrap(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _accum(t: Tensor, g: np.ndarray):
    # Never mutate grad arrays in place: closures may hand out views.
    t.grad = g if t.grad is None else t.grad + g


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise ----------------------------------------------------


def add(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _wrap(b, a.dtype)
    data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), bw)


def sub(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _wrap(b, a.dtype)
    data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), bw)


def mul(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _wrap(b, a.dtype)
    data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), bw)


def div(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _wrap(b, a.dtype)
    data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _node(data, (a, b), bw)


def neg(a):
    def bw(g):
        _accum(a, -g)

    return _node(-a.data, (a,), bw)


def pow_const(a, p):
    p = float(p)
    data = a.data ** p

    def bw(g):
        _accum(a, g * p * a.data ** (p - 1.0))

    return _node(data, (a,), bw)


def exp(a):
    data = np.exp(a.data)

    def bw(g):
        _accum(a, g * data)

    return _node(data, (a,), bw)


def log(a):
    data = np.log(a.data)

    def bw(g):
        _accum(a, g / a.data)

    return _node(data, (a,), bw)


def sqrt(a):
    data = np.sqrt(a.data)

    def bw(g):
        _accum(a, g * (0.5 / data))

    return _node(data, (a,), bw)


def tanh(a):
    data = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - data * data))

    return _node(data, (a,), bw)


def relu(a):
    mask = a.data > 0

    def bw(g):
        _accum(a, g * mask)

    return _node(a.data * mask, (a,), bw)


def leaky_relu(a, alpha: float = 0.2):
    slope = np.where(a.data > 0, 1.0, alpha).astype(a.dtype)

    def bw(g):
        _accum(a, g * slope)

    return _node(a.data * slope, (a,), bw)


# -- linear algebra and reductions ----------------------------------


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _node(data, (a, b), bw)


def sum_(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg, a.data.shape).copy())

    return _node(data, (a,), bw)


def mean_(a, axis=None, keepdims=False):
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(data.size, 1)

    def bw(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg / count, a.data.shape).astype(a.dtype))

    return _node(data, (a,), bw)


def reshape(a, shape):
    orig = a.data.shape
    data = a.data.reshape(shape)

    def bw(g):
        _accum(a, g.reshape(orig))

    return _node(data, (a,), bw)


def swapaxes(a, i: int, j: int):
    data = a.data.swapaxes(i, j)

    def bw(g):
        _accum(a, g.swapaxes(i, j))

    return _node(data, (a,), bw)


def transpose2d(a):
    return swapaxes(a, 0, 1)


def flip0(a):
    """Reverse along axis 0 (kernel flipping)."""
    data = a.data[::-1].copy()

    def bw(g):
        _accum(a, g[::-1].copy())

    return _node(data, (a,), bw)


# -- time-axis indexing (axis 1 of (batch, length, channels)) --------


def pad_time(a, left: int, right: int):
    data = np.pad(a.data, ((0, 0), (left, right), (0, 0)))
    L = a.data.shape[1]

    def bw(g):
        _accum(a, g[:, left:left + L, :].copy())

    return _node(data, (a,), bw)


def slice_time(a, start: int, length: int):
    data = a.data[:, start:start + length, :].copy()
    before, after = start, a.data.shape[1] - start - length

    def bw(g):
        _accum(a, np.pad(g, ((0, 0), (before, after), (0, 0))))

    return _node(data, (a,), bw)


def zero_insert_time(a, s: int):
    """Upsample by s: nonzero samples land at indices i*s, length L*s."""
    b, L, c = a.data.shape
    data = np.zeros((b, L * s, c), dtype=a.dtype)
    data[:, ::s, :] = a.data

    def bw(g):
        _accum(a, g[:, ::s, :].copy())

    return _node(data, (a,), bw)


def take_time(a, idx: np.ndarray):
    """Gather along the time axis with a per-batch-item index map (b, L_out)."""
    idx = np.asarray(idx)
    data = np.take_along_axis(a.data, idx[:, :, None], axis=1)
    in_len = a.data.shape[1]

    def bw(g):
        out = np.zeros((a.data.shape[0], in_len, a.data.shape[2]), dtype=g.dtype)
        bi = np.arange(a.data.shape[0])[:, None]
        np.add.at(out, (bi, idx), g)
        _accum(a, out)

    return _node(data, (a,), bw)


def scatter_time(a, idx: np.ndarray, out_len: int):
    """Scatter-add along the time axis; transpose of take_time."""
    idx = np.asarray(idx)
    b, _, c = a.data.shape
    data = np.zeros((b, out_len, c), dtype=a.dtype)
    bi = np.arange(b)[:, None]
    np.add.at(data, (bi, idx), a.data)

    def bw(g):
        _accum(a, np.take_along_axis(g, idx[:, :, None], axis=1))

    return _node(data, (a,), bw)


# -- convolution family ----------------------------------------------


def _win1d(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Contiguous im2col buffer (b*L_out, k*c) from padded (b, Lp, c)."""
    b, Lp, c = xp.shape
    L_out = (Lp - k) // stride + 1
    sb, sl, sc = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (b, L_out, k, c), (sb, stride * sl, sl, sc), writeable=False)
    return np.ascontiguousarray(view).reshape(b * L_out, k * c), L_out


def conv1d(x, w, bias=None, stride: int = 1, pad: tuple[int, int] = (0, 0)):
    """Cross-correlation along time.  x: (b, L, c_in), w: (k, c_in, c_out)."""
    k, c_in, c_out = w.data.shape
    pl, pr = pad
    xp = np.pad(x.data, ((0, 0), (pl, pr), (0, 0))) if (pl or pr) else x.data
    cols, L_out = _win1d(xp, k, stride)
    w2 = w.data.reshape(k * c_in, c_out)
    y = cols @ w2
    b = x.data.shape[0]
    y = y.reshape(b, L_out, c_out)
    if bias is not None:
        y = y + bias.data

    def bw(g):
        g2 = g.reshape(b * L_out, c_out)
        if w.requires_grad:
            _accum(w, (cols.T @ g2).reshape(k, c_in, c_out))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 1)))
        if x.requires_grad:
            dpat = (g2 @ w2.T).reshape(b, L_out, k, c_in)
            dxp = np.zeros_like(xp)
            for j in range(k):
                dxp[:, j:j + stride * L_out:stride, :] += dpat[:, :, j, :]
            L = x.data.shape[1]
            _accum(x, dxp[:, pl:pl + L, :].copy() if (pl or pr) else dxp)

    parents = (x, w) if bias is None else (x, w, bias)
    return _node(y, parents, bw)


def tconv1d(x, w, bias=None, stride: int = 1):
    """Transposed conv: zero-insertion by stride, then full correlation
    center-cropped to L*stride (the k-1 overhang drops floor((k-1)/2)
    samples on the left, the rest on the right)."""
    k = w.data.shape[0]
    crop_l = (k - 1) // 2
    up = zero_insert_time(x, stride)
    return conv1d(up, w, bias, stride=1, pad=((k - 1) - crop_l, crop_l))


def _win2d(xp: np.ndarray, kh: int, kw: int) -> tuple[np.ndarray, int, int]:
    b, Hp, Wp, c = xp.shape
    Ho, Wo = Hp - kh + 1, Wp - kw + 1
    sb, sh, sw, sc = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (b, Ho, Wo, kh, kw, c), (sb, sh, sw, sh, sw, sc), writeable=False)
    return np.ascontiguousarray(view).reshape(b * Ho * Wo, kh * kw * c), Ho, Wo


def conv2d(x, w, bias=None, pad: tuple[int, int] = (0, 0)):
    """Stride-1 2-D cross-correlation.  x: (b,H,W,c_in), w: (kh,kw,c_in,c_out)."""
    kh, kw, c_in, c_out = w.data.shape
    ph, pw = pad
    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if (ph or pw) else x.data
    cols, Ho, Wo = _win2d(xp, kh, kw)
    w2 = w.data.reshape(kh * kw * c_in, c_out)
    b = x.data.shape[0]
    y = (cols @ w2).reshape(b, Ho, Wo, c_out)
    if bias is not None:
        y = y + bias.data

    def bw(g):
        g2 = g.reshape(b * Ho * Wo, c_out)
        if w.requires_grad:
            _accum(w, (cols.T @ g2).reshape(kh, kw, c_in, c_out))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            dpat = (g2 @ w2.T).reshape(b, Ho, Wo, kh, kw, c_in)
            dxp = np.zeros_like(xp)
            for jh in range(kh):
                for jw in range(kw):
                    dxp[:, jh:jh + Ho, jw:jw + Wo, :] += dpat[:, :, :, jh, jw, :]
            H, W = x.data.shape[1:3]
            _accum(x, dxp[:, ph:ph + H, pw:pw + W, :].copy() if (ph or pw) else dxp)

    parents = (x, w) if bias is None else (x, w, bias)
    return _node(y, parents, bw)


def maxpool2d(x, ph: int, pw: int):
    """Non-overlapping max pooling; output dims floor-divide, ties take the
    first (row-major) window position."""
    b, H, W, c = x.data.shape
    Ho, Wo = H // ph, W // pw
    xc = x.data[:, :Ho * ph, :Wo * pw, :]
    win = xc.reshape(b, Ho, ph, Wo, pw, c).transpose(0, 1, 3, 2, 4, 5)
    win = np.ascontiguousarray(win).reshape(b, Ho, Wo, ph * pw, c)
    arg = win.argmax(axis=3)
    data = np.take_along_axis(win, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]

    def bw(g):
        dwin = np.zeros((b, Ho, Wo, ph * pw, c), dtype=g.dtype)
        np.put_along_axis(dwin, arg[:, :, :, None, :], g[:, :, :, None, :], axis=3)
        dxc = dwin.reshape(b, Ho, Wo, ph, pw, c).transpose(0, 1, 3, 2, 4, 5)
        dxc = dxc.reshape(b, Ho * ph, Wo * pw, c)
        if (Ho * ph, Wo * pw) != (H, W):
            dxc = np.pad(dxc, ((0, 0), (0, H - Ho * ph), (0, W - Wo * pw), (0, 0)))
        _accum(x, dxc)

    return _node(data, (x,), bw)


# -- softmax family --------------------------------------------------


def softmax(a, axis: int = -1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - dot))

    return _node(data, (a,), bw)


def log_softmax(a, axis: int = -1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def bw(g):
        soft = np.exp(data)
        _accum(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _node(data, (a,), bw)


def cross_entropy_logits(logits, onehot: np.ndarray):
    """Mean categorical cross-entropy from raw logits (fused log-softmax)."""
    lsm = log_softmax(logits, axis=-1)
    picked = mul(lsm, Tensor(onehot.astype(logits.dtype)))
    return neg(div(sum_(picked), Tensor(np.asarray(float(logits.data.shape[0]), dtype=logits.dtype))))
