"""Differentiable primitives.

Every function takes and returns :class:`Tensor` values, computes the forward
result eagerly with NumPy, and registers a gradient closure on the active
graph. With no active graph the same functions serve as the inference path.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import ShapeError
from . import kernels
from .tensor import Tensor, apply_op

__all__ = [
    "add", "sub", "mul", "scale", "div", "matmul", "affine", "conv2d",
    "maxpool2d", "prelu", "sigmoid", "tanh", "exp", "log", "sqrt", "power",
    "softmax", "cross_entropy", "concat", "reshape", "slice_", "sum_", "mean_",
    "lstm_cell", "lstm_forward",
]


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes NumPy broadcasting introduced."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)
    apply_op(
        "add", [out], [a, b],
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)
    apply_op(
        "sub", [out], [a, b],
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)
    apply_op(
        "mul", [out], [a, b],
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)
    apply_op("scale", [out], [a], lambda g: (g * s,))
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data)
    apply_op(
        "div", [out], [a, b],
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)
    apply_op("matmul", [out], [a, b], lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w + b`` with x: (N, I), w: (I, O), b: (O,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"affine shapes incompatible: x{x.data.shape} w{w.data.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise ShapeError(f"affine bias shape {b.data.shape} != ({w.data.shape[1]},)")
    out = Tensor(x.data @ w.data + b.data)
    apply_op(
        "affine", [out], [x, w, b],
        lambda g: (g @ w.data.T, x.data.T @ g, g.sum(axis=0)),
    )
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D convolution (cross-correlation) with zero padding.

    x: (N, Cin, H, W), w: (Cout, Cin, KH, KW), b: (Cout,).
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError("conv2d expects 4-D input and weights")
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(
            f"conv2d channel mismatch: input has {x.data.shape[1]}, weights expect {w.data.shape[1]}"
        )
    xd, wd = x.data, w.data
    out = Tensor(kernels.impl.conv2d_forward(xd, wd, b.data, stride, pad))

    def grad(g):
        gx, gw, gb = kernels.impl.conv2d_backward(xd, wd, g, stride, pad)
        return gx, gw, gb

    apply_op("conv2d", [out], [x, w, b], grad)
    return out


def maxpool2d(x: Tensor, window: int) -> Tensor:
    """Max pooling with stride equal to the window; ties route to the first
    maximal element in row-major order within each window."""
    if x.data.ndim != 4:
        raise ShapeError("maxpool2d expects a 4-D input")
    if x.data.shape[2] < window or x.data.shape[3] < window:
        raise ShapeError(f"maxpool2d window {window} exceeds input {x.data.shape}")
    vals, idx = kernels.impl.maxpool2d_forward(x.data, window)
    out = Tensor(vals)
    shape = x.data.shape
    apply_op(
        "maxpool2d", [out], [x],
        lambda g: (kernels.impl.maxpool2d_backward(shape, idx, g, window),),
    )
    return out


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """PReLU with a single learned slope (scalar tensor) for the whole layer."""
    xd = x.data
    sl = float(slope.data)
    neg = xd < 0
    out = Tensor(np.where(neg, sl * xd, xd))

    def grad(g):
        gx = np.where(neg, sl, 1.0) * g
        gs = np.asarray((g * xd * neg).sum(), dtype=slope.data.dtype)
        return gx, gs

    apply_op("prelu", [out], [x, slope], grad)
    return out


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    s = np.empty_like(xd)
    pos = xd >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    e = np.exp(xd[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s)
    apply_op("sigmoid", [out], [x], lambda g: (g * s * (1.0 - s),))
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = Tensor(t)
    apply_op("tanh", [out], [x], lambda g: (g * (1.0 - t * t),))
    return out


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        e = np.exp(x.data)
    out = Tensor(e)
    apply_op("exp", [out], [x], lambda g: (g * e,))
    return out


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Tensor(np.log(x.data))
    apply_op("log", [out], [x], lambda g: (g / x.data,))
    return out


def sqrt(x: Tensor) -> Tensor:
    """Square root with a zero-guarded gradient (subgradient 0 at x == 0)."""
    r = np.sqrt(x.data)
    out = Tensor(r)

    def grad(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = np.where(x.data > 0, 0.5 * g / r, 0.0)
        return (gx,)

    apply_op("sqrt", [out], [x], grad)
    return out


def power(x: Tensor, p: Tensor) -> Tensor:
    """``x ** p`` for a scalar exponent tensor; entries with x == 0 contribute
    zero gradient to both operands."""
    xd = x.data
    pv = float(p.data)
    out_d = np.where(xd > 0, np.power(np.where(xd > 0, xd, 1.0), pv), 0.0)
    out = Tensor(out_d)

    def grad(g):
        pos = xd > 0
        gx = np.where(pos, pv * out_d / np.where(pos, xd, 1.0), 0.0) * g
        gp = np.asarray(
            (g * out_d * np.where(pos, np.log(np.where(pos, xd, 1.0)), 0.0)).sum(),
            dtype=p.data.dtype,
        )
        return gx, gp

    apply_op("power", [out], [x, p], grad)
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)
    apply_op(
        "softmax", [out], [x],
        lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),),
    )
    return out


def cross_entropy(
    probs: Tensor,
    targets: np.ndarray,
    clamp: float = 1e-12,
    clamp_counter: Optional[list] = None,
) -> Tensor:
    """Mean negative log-probability of the observed classes.

    ``probs`` has classes on the last axis; ``targets`` holds integer class
    indices for the leading axes. Probabilities below ``clamp`` are clamped
    (their gradient is dropped) and counted into ``clamp_counter[0]``.
    """
    c = probs.data.shape[-1]
    p2 = probs.data.reshape(-1, c)
    t2 = np.asarray(targets).reshape(-1)
    if t2.shape[0] != p2.shape[0]:
        raise ShapeError(f"cross_entropy: {p2.shape[0]} rows but {t2.shape[0]} targets")
    if t2.min(initial=0) < 0 or t2.max(initial=0) >= c:
        raise ShapeError(f"cross_entropy: target outside [0, {c})")
    n = p2.shape[0]
    pt = p2[np.arange(n), t2]
    low = pt < clamp
    if clamp_counter is not None and low.any():
        clamp_counter[0] += int(low.sum())
    out = Tensor(np.asarray(-np.mean(np.log(np.maximum(pt, clamp))), dtype=probs.data.dtype))

    def grad(g):
        gp = np.zeros_like(p2)
        inv = np.zeros_like(pt)
        np.divide(-1.0, n * pt, out=inv, where=~low)
        gp[np.arange(n), t2] = inv * g
        return (gp.reshape(probs.data.shape),)

    apply_op("cross_entropy", [out], [probs], grad)
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    datas = [t.data for t in tensors]
    out = Tensor(np.concatenate(datas, axis=axis))
    sizes = [d.shape[axis] for d in datas]
    bounds = np.cumsum([0] + sizes)

    def grad(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(datas))
        )

    apply_op("concat", [out], list(tensors), grad)
    return out


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    apply_op("reshape", [out], [x], lambda g: (g.reshape(x.data.shape),))
    return out


def slice_(x: Tensor, key) -> Tensor:
    """Indexing with slices, ints, or an integer array (repeats allowed);
    the gradient scatter-adds into zeros."""
    out = Tensor(np.ascontiguousarray(x.data[key]))

    def grad(g):
        gx = np.zeros_like(x.data)
        if isinstance(key, np.ndarray):
            np.add.at(gx, key, g)
        else:
            gx[key] = g
        return (gx,)

    apply_op("slice", [out], [x], grad)
    return out


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)))

    def grad(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).astype(x.data.dtype, copy=True),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, x.data.shape).astype(x.data.dtype, copy=True),)

    apply_op("sum", [out], [x], grad)
    return out


def mean_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.data.shape[a] for a in np.atleast_1d(axis)])
    out = Tensor(np.asarray(x.data.mean(axis=axis, keepdims=keepdims)))

    def grad(g):
        if axis is None:
            return ((np.broadcast_to(g, x.data.shape) / count).astype(x.data.dtype, copy=True),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return ((np.broadcast_to(g_exp, x.data.shape) / count).astype(x.data.dtype, copy=True),)

    apply_op("mean", [out], [x], grad)
    return out


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    s = np.empty_like(z)
    pos = z >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    s[~pos] = e / (1.0 + e)
    return s


def lstm_cell(
    x: Tensor, h_prev: Tensor, c_prev: Tensor, w_ih: Tensor, w_hh: Tensor, b: Tensor
):
    """One step of a standard LSTM cell (gate order i, f, g, o).

    x: (B, I); h_prev, c_prev: (B, H); w_ih: (I, 4H); w_hh: (H, 4H); b: (4H,).
    Returns (h, c). Fused into one node so sequence graphs stay small.
    """
    hdim = h_prev.data.shape[-1]
    if w_ih.data.shape != (x.data.shape[-1], 4 * hdim):
        raise ShapeError(f"lstm_cell w_ih shape {w_ih.data.shape} != ({x.data.shape[-1]}, {4 * hdim})")
    if w_hh.data.shape != (hdim, 4 * hdim):
        raise ShapeError(f"lstm_cell w_hh shape {w_hh.data.shape} != ({hdim}, {4 * hdim})")
    if b.data.shape != (4 * hdim,):
        raise ShapeError(f"lstm_cell bias shape {b.data.shape} != ({4 * hdim},)")

    gates = x.data @ w_ih.data + h_prev.data @ w_hh.data + b.data
    i = _stable_sigmoid(gates[:, :hdim])
    f = _stable_sigmoid(gates[:, hdim : 2 * hdim])
    g_ = np.tanh(gates[:, 2 * hdim : 3 * hdim])
    o = _stable_sigmoid(gates[:, 3 * hdim :])
    c_new = f * c_prev.data + i * g_
    tc = np.tanh(c_new)
    h_new = o * tc

    h_out, c_out = Tensor(h_new), Tensor(c_new)

    def grad(gh, gc):
        dc = gc + gh * o * (1.0 - tc * tc)
        d_gates = np.concatenate(
            [
                dc * g_ * i * (1.0 - i),
                dc * c_prev.data * f * (1.0 - f),
                dc * i * (1.0 - g_ * g_),
                gh * tc * o * (1.0 - o),
            ],
            axis=1,
        )
        gx = d_gates @ w_ih.data.T
        ghp = d_gates @ w_hh.data.T
        gcp = dc * f
        gwi = x.data.T @ d_gates
        gwh = h_prev.data.T @ d_gates
        gb = d_gates.sum(axis=0)
        return gx, ghp, gcp, gwi, gwh, gb

    apply_op("lstm_cell", [h_out, c_out], [x, h_prev, c_prev, w_ih, w_hh, b], grad)
    return h_out, c_out


def lstm_forward(
    inputs: Tensor,
    init_hidden=None,
    init_cell=None,
    params: Sequence[dict] = (),
    num_layers: Optional[int] = None,
):
    """Run a stacked LSTM causally over a sequence.

    ``inputs`` is (T, I) for a single sequence or (B, T, I) for a batch.
    ``params`` is one dict per layer with keys ``w_ih``, ``w_hh``, ``b``.
    Returns (per-step top-layer outputs, final (h, c) pairs per layer).
    """
    if num_layers is None:
        num_layers = len(params)
    if num_layers < 1 or len(params) != num_layers:
        raise ShapeError(f"expected {num_layers} layer parameter sets, got {len(params)}")

    single = inputs.data.ndim == 2
    x = reshape(inputs, (1,) + inputs.data.shape) if single else inputs
    bsz, steps, _ = x.data.shape
    if steps < 1:
        raise ShapeError("lstm_forward requires at least one time-step")
    hdim = params[0]["w_hh"].data.shape[0]
    dtype = params[0]["w_ih"].data.dtype

    def init_state(given, li):
        if given is None:
            return Tensor(np.zeros((bsz, hdim), dtype=dtype))
        arr = np.asarray(given[li], dtype=dtype)
        if arr.ndim == 1:
            arr = np.broadcast_to(arr, (bsz, hdim)).copy()
        return arr if isinstance(given[li], Tensor) else Tensor(arr)

    hs = [init_state(init_hidden, li) for li in range(num_layers)]
    cs = [init_state(init_cell, li) for li in range(num_layers)]

    top = []
    for t in range(steps):
        inp = slice_(x, np.s_[:, t, :])
        for li, layer in enumerate(params):
            hs[li], cs[li] = lstm_cell(inp, hs[li], cs[li], layer["w_ih"], layer["w_hh"], layer["b"])
            inp = hs[li]
        top.append(reshape(inp, (bsz, 1, hdim)))

    outputs = concat(top, axis=1) if steps > 1 else top[0]
    if single:
        outputs = reshape(outputs, (steps, hdim))
        hs = [reshape(h, (hdim,)) for h in hs]
        cs = [reshape(c, (hdim,)) for c in cs]
    return outputs, list(zip(hs, cs))
