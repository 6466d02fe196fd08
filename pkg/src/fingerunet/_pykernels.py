"""Pure-numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels`` (Cython) must agree with them
to float tolerance (exactly, for the integer thinning kernels).
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "python"

# Clockwise 8-neighbourhood starting at north: P2..P9 in Zhang-Suen notation.
_NEIGHBOURS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def im2col(xp, k, stride):
    """(n, c, H, W) padded input -> (n, c*k*k, oh*ow) patch matrix."""
    n, c, H, W = xp.shape
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    # (n, c, oh, ow, k, k) -> (n, c, k, k, oh, ow)
    cols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    return cols.reshape(n, c * k * k, oh * ow)


def col2im(cols, xshape, k, stride, oh, ow):
    """Adjoint of :func:`im2col`: scatter-add patch gradients back to the padded input."""
    n, c, H, W = xshape
    cols = cols.reshape(n, c, k, k, oh, ow)
    out = np.zeros(xshape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, :, i, j]
    return out


def depthwise_forward(xp, w):
    """Per-channel stride-1 cross-correlation. xp (n,c,H,W) padded, w (c,k,k)."""
    n, c, H, W = xp.shape
    k = w.shape[-1]
    oh, ow = H - k + 1, W - k + 1
    out = np.zeros((n, c, oh, ow), dtype=np.result_type(xp, w))
    for i in range(k):
        for j in range(k):
            out += xp[:, :, i:i + oh, j:j + ow] * w[None, :, i, j, None, None]
    return out


def depthwise_backward(xp, w, gout):
    """Gradients of :func:`depthwise_forward` w.r.t. the padded input and the kernel."""
    k = w.shape[-1]
    oh, ow = gout.shape[2], gout.shape[3]
    gxp = np.zeros(xp.shape, dtype=gout.dtype)
    gw = np.zeros(w.shape, dtype=gout.dtype)
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i:i + oh, j:j + ow]
            gw[:, i, j] = np.einsum("nchw,nchw->c", patch, gout)
            gxp[:, :, i:i + oh, j:j + ow] += gout * w[None, :, i, j, None, None]
    return gxp, gw


def maxpool2_forward(x):
    """2x2/stride-2 max pool. Returns (out, argmax in 0..3, row-major, first index wins)."""
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // 2, w // 2, 4)
    idx = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int8)


def maxpool2_backward(gout, idx):
    n, c, oh, ow = gout.shape
    g = np.zeros((n, c, oh, ow, 4), dtype=gout.dtype)
    np.put_along_axis(g, idx[..., None].astype(np.intp), gout[..., None], axis=-1)
    g = g.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return g.reshape(n, c, oh * 2, ow * 2)


def _neighbour_stack(img):
    p = np.pad(img, 1)
    h, w = img.shape
    return np.stack([p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] for dr, dc in _NEIGHBOURS])


def zhang_suen(binary):
    """Zhang-Suen thinning of a {0,1} uint8 raster; the frame border counts as background."""
    img = (np.asarray(binary) != 0).astype(np.uint8)
    while True:
        changed = False
        for step in (0, 1):
            nb = _neighbour_stack(img)
            p2, p3, p4, p5, p6, p7, p8, p9 = nb
            count = nb.sum(axis=0)
            trans = ((nb == 0) & (np.roll(nb, -1, axis=0) == 1)).sum(axis=0)
            if step == 0:
                c3 = (p2 * p4 * p6) == 0
                c4 = (p4 * p6 * p8) == 0
            else:
                c3 = (p2 * p4 * p8) == 0
                c4 = (p2 * p6 * p8) == 0
            kill = (img == 1) & (count >= 2) & (count <= 6) & (trans == 1) & c3 & c4
            if kill.any():
                img[kill] = 0
                changed = True
        if not changed:
            return img


def crossing_numbers(skel):
    """CN(p) = 1/2 * sum |P_i - P_{i+1}| over the cyclic 8-neighbourhood; 0 off-skeleton."""
    img = (np.asarray(skel) != 0).astype(np.int16)
    nb = _neighbour_stack(img)
    cn = np.abs(nb - np.roll(nb, -1, axis=0)).sum(axis=0) // 2
    return (cn * img).astype(np.int16)
