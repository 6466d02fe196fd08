"""Orthonormal 2-D Haar transform layers and wavelet-attention downsampling.

For each 2x2 block ``[[a, b], [c, d]]``::

    ll = (a + b + c + d) / 2      approximation
    lh = (a + b - c - d) / 2      high-pass across rows: horizontal detail
    hl = (a - b + c - d) / 2      high-pass across columns: vertical detail
    hh = (a - b - c + d) / 2      diagonal detail

This equals applying the filter pair l = (1, 1)/sqrt(2), h = (1, -1)/sqrt(2)
along rows and columns. The transform is orthonormal, so it preserves energy
and its inverse is its transpose.
"""
import math
from dataclasses import dataclass

import numpy as np

from .nn import spatial_softmax
from .tensor import ShapeError, Tensor, add, make_node, mul

LOWPASS = (1 / math.sqrt(2), 1 / math.sqrt(2))
HIGHPASS = (1 / math.sqrt(2), -1 / math.sqrt(2))


@dataclass
class Subbands:
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor

    def __post_init__(self):
        shapes = {t.shape for t in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1:
            raise ShapeError(f"subbands must share one shape, got {sorted(shapes)}")

    def energy(self) -> float:
        return float(sum(np.sum(t.data.astype(np.float64) ** 2) for t in (self.ll, self.lh, self.hl, self.hh)))


def _blocks(x: np.ndarray):
    return x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2]


def _analysis(x: np.ndarray):
    a, b, c, d = _blocks(x)
    half = x.dtype.type(0.5)
    return (
        (a + b + c + d) * half,
        (a + b - c - d) * half,
        (a - b + c - d) * half,
        (a - b - c + d) * half,
    )


def _synthesis(ll, lh, hl, hh) -> np.ndarray:
    n, c, h, w = ll.shape
    dt = np.result_type(ll, lh, hl, hh)
    out = np.empty((n, c, 2 * h, 2 * w), dtype=dt)
    half = dt.type(0.5)
    out[:, :, 0::2, 0::2] = (ll + lh + hl + hh) * half
    out[:, :, 0::2, 1::2] = (ll + lh - hl - hh) * half
    out[:, :, 1::2, 0::2] = (ll - lh + hl - hh) * half
    out[:, :, 1::2, 1::2] = (ll - lh - hl + hh) * half
    return out


def _check_even(x: Tensor, what: str):
    if x.ndim != 4:
        raise ShapeError(f"{what} expects NCHW input, got {x.shape}")
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"{what} needs even spatial dims, got {x.shape[2]}x{x.shape[3]}")


def dwt2d(x: Tensor) -> Subbands:
    _check_even(x, "dwt2d")
    bands = _analysis(x.data)
    out = []
    for i, band in enumerate(bands):
        # the adjoint of an orthonormal analysis is synthesis with one subband active
        def bw(g, i=i):
            parts = [np.zeros_like(g)] * 4
            parts[i] = g
            return (_synthesis(*parts),)

        out.append(make_node(band, (x,), bw, "dwt2d"))
    return Subbands(*out)


def idwt2d(s: Subbands) -> Tensor:
    bands = (s.ll, s.lh, s.hl, s.hh)

    def bw(g):
        return _analysis(g)

    return make_node(_synthesis(*(t.data for t in bands)), bands, bw, "idwt2d")


def wavelet_attention(x: Tensor) -> Tensor:
    """Wavelet-attention downsampling: Z = ll + ll * softmax(lh + hl).

    The softmax runs over the spatial positions of each (sample, channel)
    plane. The diagonal subband is discarded.
    """
    _check_even(x, "wavelet_attention")
    s = dwt2d(x)
    x_g = spatial_softmax(add(s.lh, s.hl))
    attn = mul(s.ll, x_g)
    return add(s.ll, attn)


def idwt_upsample(x: Tensor) -> Tensor:
    """Double the resolution by inverting the DWT with all detail subbands zero."""
    if x.ndim != 4:
        raise ShapeError(f"idwt_upsample expects NCHW input, got {x.shape}")
    d = x.data
    half = d.dtype.type(0.5)
    out = np.repeat(np.repeat(d * half, 2, axis=2), 2, axis=3)
    n, c, h, w = d.shape

    def bw(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)) * g.dtype.type(0.5),)

    return make_node(out, (x,), bw, "idwt_upsample")
