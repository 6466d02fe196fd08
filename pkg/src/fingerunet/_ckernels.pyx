# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_pykernels``.

Every function here has the same signature and semantics as its numpy twin.
"""
import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()

NAME = "cython"


def im2col(floating[:, :, :, ::1] xp, int k, int stride):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1], H = xp.shape[2], W = xp.shape[3]
    cdef Py_ssize_t oh = (H - k) // stride + 1, ow = (W - k) // stride + 1
    dtype = np.float64 if floating is double else np.float32
    out = np.empty((n, c * k * k, oh * ow), dtype=dtype)
    cdef floating[:, :, ::1] o = out
    cdef Py_ssize_t b, ch, i, j, r, s, row, base
    for b in range(n):
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for r in range(oh):
                        base = r * ow
                        for s in range(ow):
                            o[b, row, base + s] = xp[b, ch, r * stride + i, s * stride + j]
    return out


def col2im(floating[:, :, ::1] cv, xshape, int k, int stride, int oh, int ow):
    n, c, H, W = xshape
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros(xshape, dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    cdef Py_ssize_t b, ch, i, j, r, s, row, base
    cdef Py_ssize_t nn = n, cc = c
    for b in range(nn):
        for ch in range(cc):
            for i in range(k):
                for j in range(k):
                    row = (ch * k + i) * k + j
                    for r in range(oh):
                        base = r * ow
                        for s in range(ow):
                            o[b, ch, r * stride + i, s * stride + j] += cv[b, row, base + s]
    return out


def depthwise_forward(floating[:, :, :, ::1] xp, floating[:, :, ::1] w):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1], H = xp.shape[2], W = xp.shape[3]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t oh = H - k + 1, ow = W - k + 1
    dtype = np.float64 if floating is double else np.float32
    out = np.zeros((n, c, oh, ow), dtype=dtype)
    cdef floating[:, :, :, ::1] o = out
    cdef Py_ssize_t b, ch, i, j, r, s
    cdef floating wv
    for b in range(n):
        for ch in range(c):
            for i in range(k):
                for j in range(k):
                    wv = w[ch, i, j]
                    for r in range(oh):
                        for s in range(ow):
                            o[b, ch, r, s] += xp[b, ch, r + i, s + j] * wv
    return out


def depthwise_backward(floating[:, :, :, ::1] xp, floating[:, :, ::1] w, floating[:, :, :, ::1] gout):
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    dtype = np.float64 if floating is double else np.float32
    gxp_arr = np.zeros((xp.shape[0], xp.shape[1], xp.shape[2], xp.shape[3]), dtype=dtype)
    gw_arr = np.zeros((w.shape[0], w.shape[1], w.shape[2]), dtype=dtype)
    row_arr = np.zeros(ow, dtype=np.float64)
    cdef floating[:, :, :, ::1] gxp = gxp_arr
    cdef floating[:, :, ::1] gw = gw_arr
    cdef double[::1] row = row_arr
    cdef Py_ssize_t b, ch, i, j, r, s
    cdef floating wv
    cdef double acc
    for ch in range(c):
        for i in range(k):
            for j in range(k):
                wv = w[ch, i, j]
                for s in range(ow):
                    row[s] = 0.0
                for b in range(n):
                    for r in range(oh):
                        # contiguous inner loops: axpy into the input grad, per-column partial dots
                        for s in range(ow):
                            gxp[b, ch, r + i, s + j] += gout[b, ch, r, s] * wv
                        for s in range(ow):
                            row[s] += xp[b, ch, r + i, s + j] * gout[b, ch, r, s]
                acc = 0.0
                for s in range(ow):
                    acc += row[s]
                gw[ch, i, j] = <floating>acc
    return gxp_arr, gw_arr


def maxpool2_forward(floating[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], oh = x.shape[2] // 2, ow = x.shape[3] // 2
    dtype = np.float64 if floating is double else np.float32
    out = np.empty((n, c, oh, ow), dtype=dtype)
    idx = np.empty((n, c, oh, ow), dtype=np.int8)
    cdef floating[:, :, :, ::1] o = out
    cdef cnp.int8_t[:, :, :, ::1] ix = idx
    cdef Py_ssize_t b, ch, r, s
    cdef floating best, v
    cdef cnp.int8_t arg
    for b in range(n):
        for ch in range(c):
            for r in range(oh):
                for s in range(ow):
                    best = x[b, ch, 2 * r, 2 * s]
                    arg = 0
                    v = x[b, ch, 2 * r, 2 * s + 1]
                    if v > best:
                        best = v
                        arg = 1
                    v = x[b, ch, 2 * r + 1, 2 * s]
                    if v > best:
                        best = v
                        arg = 2
                    v = x[b, ch, 2 * r + 1, 2 * s + 1]
                    if v > best:
                        best = v
                        arg = 3
                    o[b, ch, r, s] = best
                    ix[b, ch, r, s] = arg
    return out, idx


def maxpool2_backward(floating[:, :, :, ::1] gout, cnp.int8_t[:, :, :, ::1] idx):
    cdef Py_ssize_t n = gout.shape[0], c = gout.shape[1], oh = gout.shape[2], ow = gout.shape[3]
    dtype = np.float64 if floating is double else np.float32
    g_arr = np.zeros((n, c, 2 * oh, 2 * ow), dtype=dtype)
    cdef floating[:, :, :, ::1] g = g_arr
    cdef Py_ssize_t b, ch, r, s
    cdef int a
    for b in range(n):
        for ch in range(c):
            for r in range(oh):
                for s in range(ow):
                    a = idx[b, ch, r, s]
                    g[b, ch, 2 * r + a // 2, 2 * s + a % 2] = gout[b, ch, r, s]
    return g_arr


cdef inline int _at(cnp.uint8_t[:, ::1] img, Py_ssize_t r, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w) nogil:
    if r < 0 or c < 0 or r >= h or c >= w:
        return 0
    return img[r, c]


cdef inline void _neighbours(cnp.uint8_t[:, ::1] img, Py_ssize_t r, Py_ssize_t c,
                             Py_ssize_t h, Py_ssize_t w, int *p) nogil:
    # P2..P9, clockwise from north
    p[0] = _at(img, r - 1, c, h, w)
    p[1] = _at(img, r - 1, c + 1, h, w)
    p[2] = _at(img, r, c + 1, h, w)
    p[3] = _at(img, r + 1, c + 1, h, w)
    p[4] = _at(img, r + 1, c, h, w)
    p[5] = _at(img, r + 1, c - 1, h, w)
    p[6] = _at(img, r, c - 1, h, w)
    p[7] = _at(img, r - 1, c - 1, h, w)


def zhang_suen(binary):
    out = (np.asarray(binary) != 0).astype(np.uint8)
    cdef cnp.uint8_t[:, ::1] img = out
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    mark_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] mark = mark_arr
    cdef int p[8]
    cdef int step, count, trans, t, c3, c4
    cdef Py_ssize_t r, c
    cdef bint changed = True, any_kill
    while changed:
        changed = False
        for step in range(2):
            any_kill = False
            for r in range(h):
                for c in range(w):
                    mark[r, c] = 0
                    if img[r, c] == 0:
                        continue
                    _neighbours(img, r, c, h, w, p)
                    count = 0
                    trans = 0
                    for t in range(8):
                        count += p[t]
                        if p[t] == 0 and p[(t + 1) % 8] == 1:
                            trans += 1
                    if count < 2 or count > 6 or trans != 1:
                        continue
                    if step == 0:
                        c3 = p[0] * p[2] * p[4]
                        c4 = p[2] * p[4] * p[6]
                    else:
                        c3 = p[0] * p[2] * p[6]
                        c4 = p[0] * p[4] * p[6]
                    if c3 == 0 and c4 == 0:
                        mark[r, c] = 1
                        any_kill = True
            if any_kill:
                changed = True
                for r in range(h):
                    for c in range(w):
                        if mark[r, c]:
                            img[r, c] = 0
    return out


def crossing_numbers(skel):
    src = (np.asarray(skel) != 0).astype(np.uint8)
    cdef cnp.uint8_t[:, ::1] img = src
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out = np.zeros((h, w), dtype=np.int16)
    cdef cnp.int16_t[:, ::1] o = out
    cdef int p[8]
    cdef int t, acc
    cdef Py_ssize_t r, c
    for r in range(h):
        for c in range(w):
            if img[r, c] == 0:
                continue
            _neighbours(img, r, c, h, w, p)
            acc = 0
            for t in range(8):
                acc += abs(p[t] - p[(t + 1) % 8])
            o[r, c] = acc // 2
    return out
