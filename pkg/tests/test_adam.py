import numpy as np
import pytest

from learntrace.autodiff import AdamState, Tensor, adam_step
from learntrace.errors import ShapeError


def test_zero_gradient_leaves_params_unchanged():
    p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    state = AdamState([p])
    before = p.data.copy()
    adam_step([p], {p: np.zeros(3)}, state, lr=1e-3)
    np.testing.assert_array_equal(p.data, before)
    assert state.step == 1


def test_first_step_with_unit_gradient_is_minus_lr():
    # m_hat = v_hat = 1 after bias correction, so the update is
    # -lr / (1 + eps) which is -1e-3 to within 1e-8.
    p = Tensor(np.array(0.0), requires_grad=True)
    state = AdamState([p], beta1=0.9, beta2=0.999, epsilon=1e-8)
    adam_step([p], {p: np.array(1.0)}, state, lr=1e-3)
    assert float(p.data) == pytest.approx(-1e-3, abs=1e-6)
    assert float(p.data) == pytest.approx(-1e-3 / (1 + 1e-8), abs=1e-15)


def test_second_moment_grows_under_repeated_identical_gradients():
    p = Tensor(np.array(0.0), requires_grad=True)
    state = AdamState([p])
    g = {p: np.array(0.5)}
    adam_step([p], g, state, lr=1e-3)
    v1 = float(state.v[id(p)])
    adam_step([p], g, state, lr=1e-3)
    v2 = float(state.v[id(p)])
    assert v2 > v1 > 0.0


def test_shape_mismatch_raises():
    p = Tensor(np.zeros((2, 2)), requires_grad=True)
    state = AdamState([p])
    with pytest.raises(ShapeError):
        adam_step([p], {p: np.zeros(3)}, state, lr=1e-3)


def test_step_counter_increments_by_one_per_update():
    p = Tensor(np.array(0.0), requires_grad=True)
    state = AdamState([p])
    for expect in (1, 2, 3):
        adam_step([p], {p: np.array(0.1)}, state, lr=1e-2)
        assert state.step == expect


def test_accumulator_shapes_match_parameters():
    shapes = [(3, 4), (7,), ()]
    params = [Tensor(np.zeros(s), requires_grad=True) for s in shapes]
    state = AdamState(params)
    for p, s in zip(params, shapes):
        assert state.m[id(p)].shape == s
        assert state.v[id(p)].shape == s
