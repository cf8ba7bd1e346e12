import numpy as np
import pytest

from ds4d import autodiff as ad
from ds4d.autodiff import Tensor
from ds4d.nn import grad_check


def test_add_mul_broadcast_gradients():
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal(4), requires_grad=True)

    def loss():
        return ((a + b) * (a - 2.0 * b)).sum()

    assert grad_check(loss, [a, b], eps=1e-4) < 1e-7


def test_elementwise_ops_match_numpy():
    rng = np.random.default_rng(1)
    x = rng.uniform(0.5, 2.0, (5,))
    t = Tensor(x)
    assert np.array_equal(ad.exp(t).data, np.exp(x))
    assert np.array_equal(ad.log(t).data, np.log(x))
    assert np.array_equal(ad.sqrt(t).data, np.sqrt(x))
    assert np.array_equal(ad.absolute(Tensor(-x)).data, x)
    assert np.array_equal(ad.tanh(t).data, np.tanh(x))


def test_matmul_shapes_and_gradients():
    rng = np.random.default_rng(2)
    m = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    v = Tensor(rng.standard_normal(3), requires_grad=True)
    b = Tensor(rng.standard_normal((3, 5)), requires_grad=True)

    def loss():
        return ad.matmul(m, v).sum() + ad.square(ad.matmul(m, b)).sum()

    assert grad_check(loss, [m, v, b], eps=1e-6) < 1e-7


def test_matmul_dimension_mismatch():
    from ds4d.errors import ShapeError

    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_reductions_and_reshape_gradients():
    rng = np.random.default_rng(3)
    a = Tensor(rng.standard_normal((4, 6)), requires_grad=True)

    def loss():
        return (a.mean(axis=0) * a.sum(axis=0)).sum() + a.reshape((24,)).mean()

    assert grad_check(loss, [a], eps=1e-6) < 1e-7


def test_getitem_concat_stack_gradients():
    rng = np.random.default_rng(4)
    a = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal((5, 2)), requires_grad=True)

    def loss():
        c = ad.concat([a, b], axis=1)
        s = ad.stack([c[:, 0], c[:, 4]], axis=1)
        return ad.square(s).sum() + ad.square(a[1:4, :2]).sum()

    assert grad_check(loss, [a, b], eps=1e-6) < 1e-7


def test_leaky_relu_gradient_away_from_kink():
    x = Tensor(np.array([-2.0, -0.5, 0.5, 2.0]), requires_grad=True)

    def loss():
        return ad.leaky_relu(x, 0.01).sum()

    loss().backward()
    # derivative never recorded; rebuild graph
    x.zero_grad()
    out = ad.leaky_relu(x, 0.01)
    out.backward(np.ones(4))
    assert np.array_equal(x.grad, np.array([0.01, 0.01, 1.0, 1.0]))


def test_diamond_graph_accumulates_once():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * 3.0
    z = y + y
    z.backward()
    assert x.grad[0] == pytest.approx(6.0)


def test_backward_on_nonscalar_with_seed_gradient():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = x * 2.0
    y.backward(np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert np.array_equal(x.grad, np.array([[2.0, 0.0], [0.0, 6.0]]))


def test_detach_blocks_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = (x.detach() * 5.0).sum() + x.sum()
    y.backward()
    assert np.array_equal(x.grad, np.ones(2))
