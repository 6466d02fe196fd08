"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy twins in ``_pykernels`` are used. Set ``FUNET_KERNELS=python`` to force
the fallback (``cython`` makes a missing extension an ImportError).
"""
import os

import numpy as np

from . import _pykernels

_choice = os.environ.get("FUNET_KERNELS", "auto").lower()
if _choice not in ("auto", "python", "cython"):
    raise ImportError(f"FUNET_KERNELS must be auto, python or cython, got {_choice!r}")

backend = _pykernels
if _choice != "python":
    try:
        from . import _ckernels as backend  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        backend = _pykernels

BACKEND = backend.NAME


def _c(a):
    return np.ascontiguousarray(a)


def im2col(xp, k, stride=1):
    return backend.im2col(_c(xp), k, stride)


def col2im(cols, xshape, k, stride, oh, ow):
    return backend.col2im(_c(cols), tuple(xshape), k, stride, oh, ow)


def depthwise_forward(xp, w):
    dt = np.result_type(xp, w)
    return backend.depthwise_forward(_c(xp.astype(dt, copy=False)), _c(w.astype(dt, copy=False)))


def depthwise_backward(xp, w, gout):
    dt = np.result_type(xp, w, gout)
    return backend.depthwise_backward(_c(xp.astype(dt, copy=False)), _c(w.astype(dt, copy=False)),
                                      _c(gout.astype(dt, copy=False)))


def maxpool2_forward(x):
    return backend.maxpool2_forward(_c(x))


def maxpool2_backward(gout, idx):
    return backend.maxpool2_backward(_c(gout), _c(idx))


def zhang_suen(binary):
    return backend.zhang_suen(binary)


def crossing_numbers(skel):
    return backend.crossing_numbers(skel)
