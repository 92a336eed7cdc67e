"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericError
from .tensor import Graph, Tensor, backward


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-4,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` evaluates a scalar from the current parameter values. Every entry
    of every parameter is checked unless ``max_entries`` caps the number of
    (seeded, uniformly sampled) entries per parameter, which keeps large
    composites inside a test-time budget. Relative error is
    ``|a - n| / max(1, |a|, |n|)``. Parameters must be 64-bit.
    """
    with Graph() as g:
        out = fn()
    if not np.isfinite(out.data):
        raise NumericError("grad_check: function value is not finite")
    analytic = backward(g, out, params=params)

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            idxs = rng.choice(n, size=max_entries, replace=False)
        else:
            idxs = range(n)
        a_flat = analytic[p].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().data)
            flat[i] = orig - eps
            f_minus = float(fn().data)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError("grad_check: perturbed function value is not finite")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(a_flat[i])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
