"""Layer catalogue and network container.

Shape algebra is total: every layer can report its output shape from an
input shape, and ``Network`` validates the whole chain at build time so
malformed stacks are rejected before any numerics run.  Shapes here are
per-sample (no batch dim).
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-r, r, size=shape).astype(dtype), requires_grad=True)


class Layer:
    """One stage of a network: parameters plus a forward rule."""

    def params(self) -> list[tuple[str, Tensor]]:
        return []

    def init(self, rng: np.random.Generator, dtype):
        pass

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: Tensor, *, training: bool = False, rng=None) -> Tensor:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out
        self.w = None
        self.b = None

    def init(self, rng, dtype):
        self.w = glorot_uniform(rng, (self.n_in, self.n_out), self.n_in, self.n_out, dtype)
        self.b = Tensor(np.zeros(self.n_out, dtype=dtype), requires_grad=True)

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def out_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise ValueError(f"dense expects ({self.n_in},), got {in_shape}")
        return (self.n_out,)

    def forward(self, x, *, training=False, rng=None):
        return T.add(T.matmul(x, self.w), self.b)


class Conv1d(Layer):
    """Strided cross-correlation over (length, channels) with explicit padding."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: tuple[int, int]):
        self.c_in, self.c_out, self.kernel, self.stride = c_in, c_out, kernel, stride
        self.pad = pad
        self.w = None
        self.b = None

    def init(self, rng, dtype):
        k = self.kernel
        self.w = glorot_uniform(rng, (k, self.c_in, self.c_out), k * self.c_in, k * self.c_out, dtype)
        self.b = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def out_shape(self, in_shape):
        L, c = in_shape
        if c != self.c_in:
            raise ValueError(f"conv1d expects {self.c_in} channels, got {c}")
        Lp = L + self.pad[0] + self.pad[1]
        if Lp < self.kernel:
            raise ValueError("conv1d input shorter than kernel")
        return ((Lp - self.kernel) // self.stride + 1, self.c_out)

    def forward(self, x, *, training=False, rng=None):
        return T.conv1d(x, self.w, self.b, stride=self.stride, pad=self.pad)


def same_stride_pad(kernel: int, stride: int) -> tuple[int, int]:
    """Padding that makes a strided conv emit exactly L/stride frames:
    k - s total, split floor-left / ceil-right."""
    total = kernel - stride
    if total < 0:
        raise ValueError("stride exceeds kernel length")
    return (total // 2, total - total // 2)


class TConv1d(Layer):
    """Transposed conv producing exactly L*stride samples (zero-insertion
    upsampling, full correlation, center crop with the floor split left)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int):
        self.c_in, self.c_out, self.kernel, self.stride = c_in, c_out, kernel, stride
        self.w = None
        self.b = None

    def init(self, rng, dtype):
        k = self.kernel
        self.w = glorot_uniform(rng, (k, self.c_in, self.c_out), k * self.c_in, k * self.c_out, dtype)
        self.b = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def out_shape(self, in_shape):
        L, c = in_shape
        if c != self.c_in:
            raise ValueError(f"tconv1d expects {self.c_in} channels, got {c}")
        return (L * self.stride, self.c_out)

    def forward(self, x, *, training=False, rng=None):
        return T.tconv1d(x, self.w, self.b, stride=self.stride)


class Conv2d(Layer):
    """Stride-1 'same' cross-correlation over (H, W, channels)."""

    def __init__(self, c_in: int, c_out: int, kernel: int):
        if kernel % 2 == 0:
            raise ValueError("conv2d same-padding needs an odd kernel")
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.w = None
        self.b = None

    def init(self, rng, dtype):
        k = self.kernel
        self.w = glorot_uniform(rng, (k, k, self.c_in, self.c_out),
                                k * k * self.c_in, k * k * self.c_out, dtype)
        self.b = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def out_shape(self, in_shape):
        H, W, c = in_shape
        if c != self.c_in:
            raise ValueError(f"conv2d expects {self.c_in} channels, got {c}")
        return (H, W, self.c_out)

    def forward(self, x, *, training=False, rng=None):
        p = self.kernel // 2
        return T.conv2d(x, self.w, self.b, pad=(p, p))


class MaxPool2d(Layer):
    def __init__(self, ph: int, pw: int):
        self.ph, self.pw = ph, pw

    def out_shape(self, in_shape):
        H, W, c = in_shape
        return (H // self.ph, W // self.pw, c)

    def forward(self, x, *, training=False, rng=None):
        return T.maxpool2d(x, self.ph, self.pw)


class Relu(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, *, training=False, rng=None):
        return T.relu(x)


class LeakyRelu(Layer):
    def __init__(self, alpha: float = 0.2):
        self.alpha = alpha

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, *, training=False, rng=None):
        return T.leaky_relu(x, self.alpha)


class Tanh(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, *, training=False, rng=None):
        return T.tanh(x)


class Softmax(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, *, training=False, rng=None):
        return T.softmax(x, axis=-1)


class Dropout(Layer):
    """Inverted dropout: active only in training, identity at inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, *, training=False, rng=None):
        if not training or self.rate == 0.0:
            return x
        if rng is None:
            raise ValueError("dropout in training mode needs an rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.data.shape) < keep).astype(x.dtype) / keep
        return T.mul(x, Tensor(mask))


class Reshape(Layer):
    def __init__(self, target: tuple):
        self.target = tuple(target)

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.target)):
            raise ValueError(f"cannot reshape {in_shape} to {self.target}")
        return self.target

    def forward(self, x, *, training=False, rng=None):
        return T.reshape(x, (x.data.shape[0],) + self.target)


class Flatten(Layer):
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, *, training=False, rng=None):
        return T.reshape(x, (x.data.shape[0], -1))


class PhaseShuffle(Layer):
    """Random time shift by r in [-n, n] per batch item, reflection padded.

    The backward pass routes gradients through the transpose of the exact
    index map (boundary samples that were duplicated sum their gradients;
    dropped samples get zero).
    """

    def __init__(self, n: int):
        self.n = n

    def out_shape(self, in_shape):
        L, c = in_shape
        if L <= 2 * self.n:
            raise ValueError("phase shuffle needs length > 2n")
        return in_shape

    def index_map(self, batch: int, length: int, rng) -> np.ndarray:
        shifts = rng.integers(-self.n, self.n + 1, size=batch)
        t = np.arange(length)
        idx = t[None, :] - shifts[:, None]
        idx = np.abs(idx)                        # reflect the left edge
        over = idx - (length - 1)
        idx = np.where(over > 0, (length - 1) - over, idx)   # reflect the right edge
        return idx

    def forward(self, x, *, training=False, rng=None):
        if self.n == 0:
            return x
        if rng is None:
            raise ValueError("phase shuffle needs an rng")
        b, L, _ = x.data.shape
        return T.take_time(x, self.index_map(b, L, rng))


class Network:
    """Ordered layer stack with build-time shape validation."""

    def __init__(self, layers: list[tuple[str, Layer]], in_shape: tuple):
        self.layers = layers
        self.in_shape = tuple(in_shape)
        shape = self.in_shape
        self.shapes = [shape]
        for name, layer in layers:
            shape = layer.out_shape(shape)
            self.shapes.append(shape)
        self.out_shape = shape

    def init(self, rng: np.random.Generator, dtype=np.float32):
        for _, layer in self.layers:
            layer.init(rng, dtype)
        return self

    def params(self) -> list[tuple[str, Tensor]]:
        out = []
        for name, layer in self.layers:
            for pname, p in layer.params():
                out.append((f"{name}.{pname}", p))
        return out

    def zero_grad(self):
        for _, p in self.params():
            p.zero_grad()

    def forward(self, x: Tensor, *, training: bool = False, rng=None,
                trace: list | None = None) -> Tensor:
        if trace is not None:
            trace.append(("input", tuple(x.data.shape)))
        for name, layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
            if trace is not None:
                trace.append((name, tuple(x.data.shape)))
        return x

    def __call__(self, x, **kw):
        return self.forward(x, **kw)

    def input_gradient(self, x: Tensor, rng=None) -> Tensor:
        """Differentiable expression for d(score)/d(input) of a scalar-scoring
        network built from piecewise-linear layers.

        The returned tensor depends on the network weights, so a loss built
        from it backpropagates second-order information into them (this is
        what a gradient-penalty update needs).  Supported layer kinds:
        dense, conv1d, relu, leaky_relu, phase_shuffle, reshape, flatten.
        """
        if self.out_shape != (1,):
            raise ValueError("input_gradient needs a scalar-scoring network")
        b = x.data.shape[0]
        records = []
        h = Tensor(x.data)
        for name, layer in self.layers:
            in_shape = h.data.shape
            if isinstance(layer, Dense):
                records.append(("dense", layer.w))
                with T.no_grad():
                    h = layer.forward(h)
            elif isinstance(layer, Conv1d):
                records.append(("conv1d", layer, in_shape))
                with T.no_grad():
                    h = layer.forward(h)
            elif isinstance(layer, Relu):
                mask = (h.data > 0).astype(h.dtype)
                records.append(("mask", mask))
                with T.no_grad():
                    h = layer.forward(h)
            elif isinstance(layer, LeakyRelu):
                mask = np.where(h.data > 0, 1.0, layer.alpha).astype(h.dtype)
                records.append(("mask", mask))
                with T.no_grad():
                    h = layer.forward(h)
            elif isinstance(layer, PhaseShuffle):
                if layer.n == 0:
                    records.append(("identity",))
                else:
                    idx = layer.index_map(b, in_shape[1], rng)
                    records.append(("shuffle", idx, in_shape[1]))
                    h = Tensor(np.take_along_axis(h.data, idx[:, :, None], axis=1))
            elif isinstance(layer, (Reshape, Flatten)):
                records.append(("reshape", in_shape))
                with T.no_grad():
                    h = layer.forward(h)
            else:
                raise ValueError(f"input_gradient unsupported for layer {type(layer).__name__}")

        dtype = x.dtype
        g = Tensor(np.ones((b, 1), dtype=dtype))
        for rec in reversed(records):
            kind = rec[0]
            if kind == "dense":
                g = T.matmul(g, T.transpose2d(rec[1]))
            elif kind == "mask":
                g = T.mul(g, Tensor(rec[1]))
            elif kind == "identity":
                pass
            elif kind == "shuffle":
                _, idx, in_len = rec
                g = T.scatter_time(g, idx, in_len)
            elif kind == "reshape":
                g = T.reshape(g, rec[1])
            elif kind == "conv1d":
                _, layer, in_shape = rec
                k, s = layer.kernel, layer.stride
                pl, pr = layer.pad
                L = in_shape[1]
                Lp = L + pl + pr
                # Transpose of a strided correlation: dilate, pad, correlate
                # with the flipped/channel-swapped kernel at stride 1.
                gu = T.zero_insert_time(g, s)          # (L_out*s) with s-1 trailing zeros
                gu = T.pad_time(gu, k - 1, (k - 1) - (s - 1))
                wT = T.swapaxes(T.flip0(layer.w), 1, 2)
                g = T.conv1d(gu, wT, None, stride=1, pad=(0, 0))
                g = T.slice_time(g, pl, L) if (pl or pr or g.data.shape[1] != L) else g
        if g.data.shape != x.data.shape:
            raise AssertionError("input gradient shape mismatch")
        return g
