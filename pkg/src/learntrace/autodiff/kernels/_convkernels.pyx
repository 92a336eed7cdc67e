# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution and pooling kernels.

Direct loops over kernel offsets with a contiguous inner axis; no im2col
materialization, so memory traffic stays at one pass over the operands.
Semantics match numpy_backend exactly (pool ties: first max in row-major
window order).
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double

name = "compiled"


def _pad(x, int pad):
    if pad == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _conv_fwd(real[:, :, :, ::1] xp, real[:, :, :, ::1] w, real[:, :, :, ::1] out,
                    int stride) noexcept nogil:
    cdef Py_ssize_t n = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t ni, co, ci, i, j, y, x
    cdef real wv
    cdef real* orow
    cdef real* xrow
    for ni in range(n):
        for co in range(cout):
            for ci in range(cin):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[co, ci, i, j]
                        for y in range(oh):
                            orow = &out[ni, co, y, 0]
                            xrow = &xp[ni, ci, y * stride + i, j]
                            if stride == 1:
                                for x in range(ow):
                                    orow[x] += wv * xrow[x]
                            else:
                                for x in range(ow):
                                    orow[x] += wv * xrow[x * stride]


def conv2d_forward(x, w, b, int stride, int pad):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    xp = _pad(x, pad)
    n, cin, h, wid = xp.shape
    cout, _, kh, kw = w.shape
    oh = (h - kh) // stride + 1
    ow = (wid - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow), dtype=x.dtype)
    if x.dtype == np.float64:
        _conv_fwd[double](xp, w, out, stride)
    else:
        _conv_fwd[float](xp, w, out, stride)
    if b is not None:
        out += np.asarray(b, dtype=x.dtype).reshape(1, cout, 1, 1)
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _conv_bwd(real[:, :, :, ::1] xp, real[:, :, :, ::1] w, real[:, :, :, ::1] g,
                    real[:, :, :, ::1] gxp, real[:, :, :, ::1] gw, int stride) noexcept nogil:
    cdef Py_ssize_t n = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = g.shape[2], ow = g.shape[3]
    cdef Py_ssize_t ni, co, ci, i, j, y, x
    cdef real wv, acc
    cdef real* grow
    cdef real* xrow
    cdef real* gxrow
    for ni in range(n):
        for co in range(cout):
            for ci in range(cin):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[co, ci, i, j]
                        acc = 0.0
                        for y in range(oh):
                            grow = &g[ni, co, y, 0]
                            xrow = &xp[ni, ci, y * stride + i, j]
                            gxrow = &gxp[ni, ci, y * stride + i, j]
                            if stride == 1:
                                for x in range(ow):
                                    acc += grow[x] * xrow[x]
                                    gxrow[x] += wv * grow[x]
                            else:
                                for x in range(ow):
                                    acc += grow[x] * xrow[x * stride]
                                    gxrow[x * stride] += wv * grow[x]
                        gw[co, ci, i, j] += acc


def conv2d_backward(x, w, gout, int stride, int pad):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    gout = np.ascontiguousarray(gout, dtype=x.dtype)
    xp = _pad(x, pad)
    n, cin, h, wid = x.shape
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    if x.dtype == np.float64:
        _conv_bwd[double](xp, w, gout, gxp, gw, stride)
    else:
        _conv_bwd[float](xp, w, gout, gxp, gw, stride)
    gx = gxp[:, :, pad : pad + h, pad : pad + wid] if pad else gxp
    gb = gout.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(gx), gw, gb


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _pool_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] out,
                    cnp.int64_t[:, :, :, ::1] idx, int k) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t ni, ci, y, x_, i, j
    cdef real best, v
    cdef Py_ssize_t best_k
    for ni in range(n):
        for ci in range(c):
            for y in range(oh):
                for x_ in range(ow):
                    best = x[ni, ci, y * k, x_ * k]
                    best_k = 0
                    for i in range(k):
                        for j in range(k):
                            v = x[ni, ci, y * k + i, x_ * k + j]
                            if v > best:
                                best = v
                                best_k = i * k + j
                    out[ni, ci, y, x_] = best
                    idx[ni, ci, y, x_] = best_k


def maxpool2d_forward(x, int window):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    oh, ow = h // window, w // window
    out = np.zeros((n, c, oh, ow), dtype=x.dtype)
    idx = np.zeros((n, c, oh, ow), dtype=np.int64)
    if x.dtype == np.float64:
        _pool_fwd[double](x, out, idx, window)
    else:
        _pool_fwd[float](x, out, idx, window)
    return out, idx


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _pool_bwd(real[:, :, :, ::1] gx, cnp.int64_t[:, :, :, ::1] idx,
                    real[:, :, :, ::1] g, int k) noexcept nogil:
    cdef Py_ssize_t n = g.shape[0], c = g.shape[1]
    cdef Py_ssize_t oh = g.shape[2], ow = g.shape[3]
    cdef Py_ssize_t ni, ci, y, x_, best_k
    for ni in range(n):
        for ci in range(c):
            for y in range(oh):
                for x_ in range(ow):
                    best_k = idx[ni, ci, y, x_]
                    gx[ni, ci, y * k + best_k // k, x_ * k + best_k % k] += g[ni, ci, y, x_]


def maxpool2d_backward(x_shape, idx, gout, int window):
    gout = np.ascontiguousarray(gout)
    gx = np.zeros(x_shape, dtype=gout.dtype)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if gout.dtype == np.float64:
        _pool_bwd[double](gx, idx, gout, window)
    else:
        _pool_bwd[float](gx, idx, gout, window)
    return gx
