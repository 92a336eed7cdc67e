"""Pure-NumPy convolution and pooling kernels.

Convolutions are computed as a sum over kernel offsets of batched GEMMs on
strided slices, which keeps peak memory at one (N, Cin, OH*OW) buffer instead
of a full im2col matrix. Pooling windows are non-overlapping (stride equals
the window), so forward and backward reduce to reshapes plus an argmax.
"""

from __future__ import annotations

import numpy as np

name = "numpy"


def conv2d_forward(x: np.ndarray, w: np.ndarray, b, stride: int, pad: int) -> np.ndarray:
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wid + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    out = np.zeros((n, cout, oh * ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            xs = np.ascontiguousarray(xs).reshape(n, cin, oh * ow)
            out += np.matmul(w[:, :, i, j], xs)
    out = out.reshape(n, cout, oh, ow)
    if b is not None:
        out += b.reshape(1, cout, 1, 1)
    return out


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, gout: np.ndarray, stride: int, pad: int
):
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    _, _, oh, ow = gout.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    g2 = np.ascontiguousarray(gout).reshape(n, cout, oh * ow)
    g2t = np.ascontiguousarray(g2.transpose(0, 2, 1))  # (n, L, cout), one copy
    for i in range(kh):
        for j in range(kw):
            sl = np.s_[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
            xs = np.ascontiguousarray(xp[sl]).reshape(n, cin, oh * ow)
            # gw[co, ci] = sum_n xs[n, ci] . g2[n, co] as one batched GEMM
            gw[:, :, i, j] = np.matmul(xs, g2t).sum(axis=0).T
            gxp[sl] += np.matmul(w[:, :, i, j].T, g2).reshape(n, cin, oh, ow)
    gx = gxp[:, :, pad : pad + h, pad : pad + wid] if pad else gxp
    gb = gout.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(gx), gw, gb


def maxpool2d_forward(x: np.ndarray, window: int):
    """Returns pooled values and the flat in-window argmax (first max wins)."""
    n, c, h, w = x.shape
    oh, ow = h // window, w // window
    xc = x[:, :, : oh * window, : ow * window]
    xr = xc.reshape(n, c, oh, window, ow, window).transpose(0, 1, 2, 4, 3, 5)
    flat = np.ascontiguousarray(xr).reshape(n, c, oh, ow, window * window)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2d_backward(x_shape, idx: np.ndarray, gout: np.ndarray, window: int) -> np.ndarray:
    n, c, h, w = x_shape
    oh, ow = idx.shape[2], idx.shape[3]
    flat = np.zeros((n, c, oh, ow, window * window), dtype=gout.dtype)
    np.put_along_axis(flat, idx[..., None], gout[..., None], axis=-1)
    gx = np.zeros(x_shape, dtype=gout.dtype)
    blocks = flat.reshape(n, c, oh, ow, window, window).transpose(0, 1, 2, 4, 3, 5)
    gx[:, :, : oh * window, : ow * window] = blocks.reshape(n, c, oh * window, ow * window)
    return gx
