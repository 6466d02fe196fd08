"""Layer kernels with forward and backward rules.

Convolutions are cross-correlations (no kernel flip) over NCHW tensors with
zero padding. Standard convolution goes through im2col + matmul; the
depthwise stage and 2x2 max pooling call the compiled kernels when present.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .tensor import ShapeError, Tensor, get_dtype, make_node


# --- parameter containers ----------------------------------------------------

def he_uniform(shape, fan_in: int, gen: np.random.Generator) -> Tensor:
    bound = math.sqrt(6.0 / fan_in)
    return Tensor(gen.uniform(-bound, bound, size=shape).astype(get_dtype()), requires_grad=True)


@dataclass
class ConvParams:
    weight: Tensor  # (c_out, c_in, k, k)
    bias: Tensor  # (c_out,)
    stride: int = 1
    padding: int = 0

    @classmethod
    def init(cls, c_in: int, c_out: int, k: int, gen: np.random.Generator, same: bool = True):
        if k % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {k}")
        w = he_uniform((c_out, c_in, k, k), c_in * k * k, gen)
        b = Tensor(np.zeros(c_out, dtype=get_dtype()), requires_grad=True)
        return cls(w, b, 1, (k - 1) // 2 if same else 0)

    def named_parameters(self, prefix=""):
        yield prefix + "weight", self.weight
        yield prefix + "bias", self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self)


@dataclass
class DSConvParams:
    depthwise: Tensor  # (c_in, 1, k, k)
    pointwise: Tensor  # (c_out, c_in, 1, 1)
    bias: Tensor  # (c_out,)

    @classmethod
    def init(cls, c_in: int, c_out: int, k: int, gen: np.random.Generator):
        if k % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {k}")
        dw = he_uniform((c_in, 1, k, k), k * k, gen)
        pw = he_uniform((c_out, c_in, 1, 1), c_in, gen)
        b = Tensor(np.zeros(c_out, dtype=get_dtype()), requires_grad=True)
        return cls(dw, pw, b)

    def named_parameters(self, prefix=""):
        yield prefix + "depthwise", self.depthwise
        yield prefix + "pointwise", self.pointwise
        yield prefix + "bias", self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return depthwise_separable_conv2d(x, self)


def ds_param_count(c_in: int, c_out: int, k: int) -> int:
    return c_in * k * k + c_in * c_out + c_out


def conv_param_count(c_in: int, c_out: int, k: int) -> int:
    return c_out * c_in * k * k + c_out


@dataclass
class BatchNormState:
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def init(cls, c: int, momentum: float = 0.1, eps: float = 1e-5):
        dt = get_dtype()
        return cls(Tensor(np.ones(c, dtype=dt), requires_grad=True),
                   Tensor(np.zeros(c, dtype=dt), requires_grad=True),
                   np.zeros(c, dtype=dt), np.ones(c, dtype=dt), momentum, eps)

    def named_parameters(self, prefix=""):
        yield prefix + "gamma", self.gamma
        yield prefix + "beta", self.beta

    def named_buffers(self, prefix=""):
        yield prefix + "running_mean", self.running_mean
        yield prefix + "running_var", self.running_var


# --- convolution -------------------------------------------------------------

def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _unpad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return x[:, :, p:-p, p:-p]


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    w, b = p.weight, p.bias
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input, got shape {x.shape}")
    n, c_in, h, wd = x.shape
    c_out, wc_in, k, k2 = w.shape
    if wc_in != c_in or k != k2:
        raise ShapeError(f"conv2d: weight {w.shape} does not match input channels {c_in}")
    s, pad = p.stride, p.padding
    if h + 2 * pad < k or wd + 2 * pad < k:
        raise ShapeError(f"conv2d: input {h}x{wd} with padding {pad} smaller than kernel {k}")

    if k == 1 and s == 1 and pad == 0:
        cols = x.data.reshape(n, c_in, h * wd)
        oh, ow = h, wd
        xp_shape = None
    else:
        xp = _pad(x.data, pad)
        xp_shape = xp.shape
        cols = kernels.im2col(xp, k, s)
        oh = (h + 2 * pad - k) // s + 1
        ow = (wd + 2 * pad - k) // s + 1
    w2 = w.data.reshape(c_out, -1)
    out = np.matmul(w2, cols) + b.data[None, :, None]
    out = out.reshape(n, c_out, oh, ow)

    def bw(g):
        g2 = g.reshape(n, c_out, oh * ow)
        gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2])).reshape(w.shape) if w.requires_grad else None
        gb = g2.sum(axis=(0, 2)) if b.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2)
            if xp_shape is None:
                gx = gcols.reshape(x.shape)
            else:
                gx = _unpad(kernels.col2im(gcols, xp_shape, k, s, oh, ow), pad)
        return gx, gw, gb

    return make_node(out, (x, w, b), bw, "conv2d")


def depthwise_conv2d(x: Tensor, w: Tensor, padding: int) -> Tensor:
    """Per-channel 'same'-style stride-1 convolution; ``w`` is (c, 1, k, k)."""
    if x.ndim != 4 or w.shape[0] != x.shape[1] or w.shape[1] != 1:
        raise ShapeError(f"depthwise conv: weight {w.shape} does not match input {x.shape}")
    k = w.shape[-1]
    xp = _pad(x.data, padding)
    w3 = w.data.reshape(w.shape[0], k, k)
    out = kernels.depthwise_forward(xp, w3)

    def bw(g):
        gxp, gw = kernels.depthwise_backward(xp, w3, g)
        return _unpad(gxp, padding), gw.reshape(w.shape)

    return make_node(out, (x, w), bw, "depthwise_conv2d")


def depthwise_separable_conv2d(x: Tensor, p: DSConvParams) -> Tensor:
    if x.ndim != 4 or p.depthwise.shape[0] != x.shape[1]:
        raise ShapeError(f"ds conv: depthwise weight {p.depthwise.shape} does not match input {x.shape}")
    k = p.depthwise.shape[-1]
    mid = depthwise_conv2d(x, p.depthwise, (k - 1) // 2)
    return conv2d(mid, ConvParams(p.pointwise, p.bias, 1, 0))


# --- activations ---------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0)
    return make_node(y, (x,), lambda g: (g * (y > 0),), "relu")


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype)
    return make_node(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_node(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def activation(kind: str, x: Tensor) -> Tensor:
    fns = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}
    if kind not in fns:
        raise ValueError(f"unknown activation {kind!r}")
    return fns[kind](x)


def spatial_softmax(x: Tensor) -> Tensor:
    """Softmax over all spatial positions of each (sample, channel) plane."""
    if x.ndim != 4:
        raise ShapeError(f"spatial_softmax expects NCHW, got {x.shape}")
    d = x.data
    e = np.exp(d - d.max(axis=(2, 3), keepdims=True))
    y = e / e.sum(axis=(2, 3), keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=(2, 3), keepdims=True)),)

    return make_node(y, (x,), bw, "softmax")


# --- normalisation and pooling -------------------------------------------------

def batch_norm2d(x: Tensor, s: BatchNormState, train: bool) -> Tensor:
    if x.ndim != 4 or x.shape[1] != s.gamma.shape[0]:
        raise ShapeError(f"batch_norm2d: {s.gamma.shape[0]} channels in state, input {x.shape}")
    d = x.data
    gamma, beta = s.gamma, s.beta
    if train:
        mu = d.mean(axis=(0, 2, 3))
        var = d.var(axis=(0, 2, 3))
        m = s.momentum
        s.running_mean[...] = (1 - m) * s.running_mean + m * mu
        s.running_var[...] = (1 - m) * s.running_var + m * var
    else:
        mu, var = s.running_mean, s.running_var
    inv = (1.0 / np.sqrt(var + s.eps)).astype(d.dtype)
    xhat = (d - mu.astype(d.dtype)[None, :, None, None]) * inv[None, :, None, None]
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]
    count = d.shape[0] * d.shape[2] * d.shape[3]

    def bw(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        gxhat = g * gamma.data[None, :, None, None]
        if train:
            gx = (inv[None, :, None, None] / count) * (
                count * gxhat
                - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            )
        else:
            gx = gxhat * inv[None, :, None, None]
        return gx, ggamma, gbeta

    return make_node(out, (x, gamma, beta), bw, "batch_norm2d")


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 window, stride 2; gradient goes to the first maximal element in row-major order."""
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"max_pool2d needs even spatial dims, got {x.shape}")
    out, idx = kernels.maxpool2_forward(x.data)
    return make_node(out, (x,), lambda g: (kernels.maxpool2_backward(g, idx),), "max_pool2d")
