import numpy as np
import pytest

from learntrace.autodiff import Tensor, apply_op, grad_check, ops
from learntrace.errors import NumericError


def test_affine_cross_entropy_below_tolerance():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(4, 3)))
    w = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    b = Tensor(rng.normal(size=5), requires_grad=True)
    targets = rng.integers(0, 5, size=4)

    def f():
        return ops.cross_entropy(ops.softmax(ops.affine(x, w, b)), targets)

    assert grad_check(f, [w, b], eps=1e-4) < 1e-6


def test_constant_function_has_zero_error():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)

    def f():
        return ops.sum_(ops.mul(p, Tensor(np.zeros(2))))

    assert grad_check(f, [p], eps=1e-4) == 0.0


def test_detects_deliberately_scaled_gradient():
    p = Tensor(np.array(1.3), requires_grad=True)

    def doubled_grad_identity(t):
        out = Tensor(t.data.copy())
        apply_op("doubled_identity", [out], [t], lambda g: (2.0 * g,))
        return out

    def f():
        return ops.mul(doubled_grad_identity(p), p)

    assert grad_check(f, [p], eps=1e-4) >= 0.3


def test_nonfinite_function_value_raises():
    p = Tensor(np.array(0.0), requires_grad=True)

    def f():
        return ops.log(p)

    with pytest.raises(NumericError):
        grad_check(f, [p])


def test_entry_sampling_caps_work():
    rng = np.random.default_rng(1)
    w = Tensor(rng.normal(size=(20, 20)), requires_grad=True)
    x = Tensor(rng.normal(size=(2, 20)))

    def f():
        return ops.mean_(ops.tanh(ops.matmul(x, w)))

    err = grad_check(f, [w], eps=1e-4, max_entries=16, rng=np.random.default_rng(9))
    assert err < 1e-7
