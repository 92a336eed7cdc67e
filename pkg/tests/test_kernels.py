import numpy as np
import pytest

from learntrace.autodiff import Graph, Tensor, backward, grad_check, ops
from learntrace.autodiff.kernels import compiled_backend, numpy_backend
from learntrace.errors import ShapeError


def conv2d_loop_oracle(x, w, b, stride, pad):
    """Direct quadruple-loop convolution used as an independent reference."""
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wid + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow))
    for ni in range(n):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[ni, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[ni, co, i, j] = (patch * w[co]).sum() + b[co]
    return out


def pool_loop_oracle(x, k):
    n, c, h, w = x.shape
    oh, ow = h // k, w // k
    out = np.zeros((n, c, oh, ow))
    for ni in range(n):
        for ci in range(c):
            for i in range(oh):
                for j in range(ow):
                    out[ni, ci, i, j] = x[ni, ci, i * k : (i + 1) * k, j * k : (j + 1) * k].max()
    return out


BACKENDS = [numpy_backend] + ([compiled_backend] if compiled_backend is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda b: b.name)
def backend(request, monkeypatch):
    from learntrace.autodiff import kernels

    monkeypatch.setattr(kernels, "impl", request.param)
    return request.param


class TestConv2d:
    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 2), (2, 1)])
    def test_forward_matches_loop_oracle(self, backend, stride, pad):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 3, 9, 8))
        w = rng.normal(size=(4, 3, 5, 5))
        b = rng.normal(size=4)
        got = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, pad=pad).data
        np.testing.assert_allclose(got, conv2d_loop_oracle(x, w, b, stride, pad), atol=1e-12)

    def test_gradients_pass_finite_difference_check(self, backend):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=(2, 2, 6, 6)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        tgt = rng.normal(size=(2, 3, 3, 3))

        def f():
            y = ops.conv2d(x, w, b, stride=2, pad=1)
            return ops.mean_(ops.mul(ops.sub(y, Tensor(tgt)), ops.sub(y, Tensor(tgt))))

        assert grad_check(f, [x, w, b], eps=1e-5) < 1e-7

    def test_channel_mismatch_raises(self, backend):
        with pytest.raises(ShapeError):
            ops.conv2d(Tensor(np.zeros((1, 3, 8, 8))), Tensor(np.zeros((4, 2, 5, 5))), Tensor(np.zeros(4)))


class TestMaxPool:
    def test_forward_matches_loop_oracle(self, backend):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 3, 8, 12))
        got = ops.maxpool2d(Tensor(x), 4).data
        np.testing.assert_allclose(got, pool_loop_oracle(x, 4), atol=0)

    def test_constant_input_passes_through(self, backend):
        x = Tensor(np.full((1, 1, 8, 8), 2.5))
        out = ops.maxpool2d(x, 4)
        np.testing.assert_array_equal(out.data, 2.5)

    def test_gradient_routes_to_first_argmax_on_ties(self, backend):
        x = Tensor(np.zeros((1, 1, 4, 4)), requires_grad=True)
        with Graph() as g:
            f = ops.sum_(ops.maxpool2d(x, 4))
        grads = backward(g, f, params=[x])
        expect = np.zeros((1, 1, 4, 4))
        expect[0, 0, 0, 0] = 1.0  # first element in row-major order wins the tie
        np.testing.assert_array_equal(grads[x], expect)

    def test_gradient_finite_difference(self, backend):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(2, 2, 6, 6)), requires_grad=True)
        coef = Tensor(rng.normal(size=(2, 2, 3, 3)))

        def f():
            return ops.sum_(ops.mul(ops.maxpool2d(x, 2), coef))

        assert grad_check(f, [x], eps=1e-5) < 1e-8

    def test_non_divisible_input_drops_trailing_edge(self, backend):
        x = np.arange(1 * 1 * 5 * 7, dtype=np.float64).reshape(1, 1, 5, 7)
        out = ops.maxpool2d(Tensor(x), 2).data
        assert out.shape == (1, 1, 2, 3)
        np.testing.assert_allclose(out, pool_loop_oracle(x, 2))


@pytest.mark.skipif(compiled_backend is None, reason="compiled kernels not built")
class TestBackendEquivalence:
    def test_conv_both_directions_agree(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(3, 3, 12, 12))
        w = rng.normal(size=(8, 3, 5, 5))
        b = rng.normal(size=8)
        f_np = numpy_backend.conv2d_forward(x, w, b, 1, 2)
        f_c = compiled_backend.conv2d_forward(x, w, b, 1, 2)
        np.testing.assert_allclose(f_c, f_np, atol=1e-11)
        g = rng.normal(size=f_np.shape)
        for a, bb in zip(
            numpy_backend.conv2d_backward(x, w, g, 1, 2),
            compiled_backend.conv2d_backward(x, w, g, 1, 2),
        ):
            np.testing.assert_allclose(bb, a, atol=1e-11)

    def test_pool_agrees(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 4, 16, 16))
        v_np, i_np = numpy_backend.maxpool2d_forward(x, 4)
        v_c, i_c = compiled_backend.maxpool2d_forward(x, 4)
        np.testing.assert_array_equal(v_c, v_np)
        np.testing.assert_array_equal(i_c, i_np)
        g = rng.normal(size=v_np.shape)
        np.testing.assert_array_equal(
            compiled_backend.maxpool2d_backward(x.shape, i_c, g, 4),
            numpy_backend.maxpool2d_backward(x.shape, i_np, g, 4),
        )
