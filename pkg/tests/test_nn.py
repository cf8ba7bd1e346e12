import numpy as np
import pytest

from ds4d import autodiff as ad
from ds4d.autodiff import Tensor
from ds4d.errors import CheckError, DomainError, OptimizerError, ShapeError
from ds4d.nn import (AdamState, LinearLayer, Mlp, adam_step, grad_check,
                     init_linear, init_mlp, linear_apply, mlp_apply, softmax)


def test_linear_identity_case():
    layer = LinearLayer(Tensor(np.eye(2)), Tensor(np.zeros(2)))
    out = linear_apply(layer, Tensor(np.array([1.0, 2.0])))
    assert np.array_equal(out.data, [1.0, 2.0])


def test_linear_constant_map():
    layer = LinearLayer(Tensor(np.zeros((1, 3))), Tensor(np.array([5.0])))
    out = linear_apply(layer, Tensor(np.array([9.0, -1.0, 7.0])))
    assert np.array_equal(out.data, [5.0])


def test_linear_matches_dot_product_loop():
    rng = np.random.default_rng(5)
    layer = init_linear(7, 4, rng)
    x = rng.standard_normal(7)
    out = linear_apply(layer, Tensor(x)).data
    expected = np.zeros(4)
    for i in range(4):
        acc = layer.bias.data[i]
        for j in range(7):
            acc += layer.weight.data[i, j] * x[j]
        expected[i] = acc
    assert np.allclose(out, expected, atol=1e-12)


def test_linear_shape_mismatch():
    layer = LinearLayer(Tensor(np.eye(2)), Tensor(np.zeros(2)))
    with pytest.raises(ShapeError):
        linear_apply(layer, Tensor(np.zeros(3)))


def test_linear_bias_weight_mismatch_rejected():
    with pytest.raises(ShapeError):
        LinearLayer(Tensor(np.eye(3)), Tensor(np.zeros(2)))


def test_softmax_closed_form():
    out = softmax(Tensor(np.array([0.0, np.log(3.0)])))
    assert np.allclose(out.data, [0.25, 0.75], atol=1e-12)


def test_softmax_symmetry_and_simplex():
    out = softmax(Tensor(np.array([2.5, 2.5, 2.5])))
    assert np.allclose(out.data, [1 / 3] * 3, atol=1e-12)
    rng = np.random.default_rng(6)
    v = rng.standard_normal((20, 7))
    w = softmax(Tensor(v), axis=1).data
    assert np.all(w > 0)
    assert np.abs(w.sum(axis=1) - 1.0).max() < 1e-12


def test_softmax_shift_invariance():
    v = np.array([0.3, -1.2, 4.0])
    a = softmax(Tensor(v)).data
    b = softmax(Tensor(v + 100.0)).data
    assert np.allclose(a, b, atol=1e-12)


def test_softmax_empty_vector():
    with pytest.raises(DomainError):
        softmax(Tensor(np.zeros(0)))


def test_mlp_zero_final_layer_gives_zero_output():
    rng = np.random.default_rng(7)
    net = init_mlp(4, [8], 3, rng, zero_final=True)
    out = mlp_apply(net, Tensor(rng.standard_normal(4)))
    assert np.array_equal(out.data, np.zeros(3))


def test_mlp_single_identity_layer_linear_activation():
    net = Mlp([LinearLayer(Tensor(np.eye(3)), Tensor(np.zeros(3)))], "linear")
    x = np.array([0.5, -2.0, 3.0])
    assert np.array_equal(mlp_apply(net, Tensor(x)).data, x)


def test_mlp_matches_hand_composed_matvec_chain():
    rng = np.random.default_rng(8)
    net = init_mlp(3, [5], 2, rng, activation="leaky")
    x = rng.standard_normal(3)
    h = net.layers[0].weight.data @ x + net.layers[0].bias.data
    h = np.where(h >= 0, h, 0.01 * h)
    expected = net.layers[1].weight.data @ h + net.layers[1].bias.data
    assert np.allclose(mlp_apply(net, Tensor(x)).data, expected, atol=1e-12)


def test_mlp_incompatible_layers_rejected():
    rng = np.random.default_rng(9)
    with pytest.raises(ShapeError):
        Mlp([init_linear(3, 4, rng), init_linear(5, 2, rng)])


def test_mlp_gradcheck_below_tolerance():
    rng = np.random.default_rng(21)
    net = init_mlp(5, [16, 16], 3, rng)
    x = Tensor(rng.standard_normal(5), requires_grad=True)

    def loss():
        return ad.square(mlp_apply(net, x)).mean()

    assert grad_check(loss, net.parameters() + [x], eps=1e-3) < 1e-6


def test_adam_zero_gradients_noop():
    rng = np.random.default_rng(10)
    params = [Tensor(rng.standard_normal((3, 2)), requires_grad=True, name="w")]
    before = params[0].data.copy()
    state = AdamState.for_params(params)
    adam_step(params, [np.zeros((3, 2))], state, lr=0.1)
    assert np.array_equal(params[0].data, before)
    assert state.step == 1


def test_adam_descends_against_constant_gradient():
    params = [Tensor(np.zeros(2), requires_grad=True)]
    state = AdamState.for_params(params)
    g = np.array([1.0, -2.0])
    for _ in range(50):
        adam_step(params, [g], state, lr=0.01)
    assert np.all(np.sign(params[0].data) == -np.sign(g))


def test_adam_single_step_matches_textbook_formula():
    params = [Tensor(np.array([1.0]), requires_grad=True)]
    state = AdamState.for_params(params)
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    g = 0.5
    adam_step(params, [np.array([g])], state, lr, (b1, b2), eps)
    m_hat = ((1 - b1) * g) / (1 - b1)
    v_hat = ((1 - b2) * g * g) / (1 - b2)
    expected = 1.0 - lr * m_hat / (np.sqrt(v_hat) + eps)
    assert params[0].data[0] == pytest.approx(expected, abs=1e-15)


def test_adam_rejects_nonfinite_gradient_naming_parameter():
    params = [Tensor(np.zeros(2), requires_grad=True, name="opacity")]
    state = AdamState.for_params(params)
    with pytest.raises(OptimizerError, match="opacity"):
        adam_step(params, [np.array([np.nan, 0.0])], state, lr=0.1)


def test_adam_state_extend_after_growth():
    params = [Tensor(np.zeros((2, 3)), requires_grad=True)]
    state = AdamState.for_params(params)
    adam_step(params, [np.ones((2, 3))], state, lr=0.1)
    params[0].data = np.zeros((4, 3))
    state.extend(params)
    assert state.m[0].shape == (4, 3)
    assert np.array_equal(state.m[0][2:], np.zeros((2, 3)))


def test_grad_check_polynomial():
    x = Tensor(np.array([3.0]), requires_grad=True)

    def loss():
        return ad.square(x).sum()

    assert grad_check(loss, [x], eps=1e-4) < 1e-8


def test_grad_check_softmax_cross_entropy():
    rng = np.random.default_rng(13)
    logits = Tensor(rng.standard_normal(3), requires_grad=True)

    def loss():
        return -ad.log(softmax(logits)[1])

    assert grad_check(loss, [logits], eps=1e-5) < 1e-6


def test_grad_check_rejects_nonfinite_loss():
    x = Tensor(np.array([0.0]), requires_grad=True)

    def loss():
        with np.errstate(divide="ignore"):
            return ad.log(x).sum()

    with pytest.raises(CheckError):
        grad_check(loss, [x], eps=1e-5)


def test_grad_check_rejects_bad_eps():
    x = Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(DomainError):
        grad_check(lambda: ad.square(x).sum(), [x], eps=0.5)
