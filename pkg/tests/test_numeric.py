import numpy as np
import pytest

from feature_extractor.numeric import (
    AdamDirection, SgdDirection, activation_backward, activation_forward, add_grads, affine_backward,
    affine_forward, glorot_uniform, grad_check, make_direction,
)
from utils.errors import NumericError


def test_affine_identity_input():
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(affine_forward(np.eye(2), W, np.zeros(2)), W)


def test_affine_zero_input():
    b = np.array([0.5, -1.5, 2.0])
    out = affine_forward(np.zeros((4, 2)), np.ones((2, 3)), b)
    np.testing.assert_array_equal(out, np.tile(b, (4, 1)))


def test_affine_matches_loop_product(rng):
    x, W, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)
    expected = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            expected[i, j] = sum(x[i, k] * W[k, j] for k in range(4)) + b[j]
    np.testing.assert_allclose(affine_forward(x, W, b), expected, rtol=1e-12)


def test_affine_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(3, 4\).*\(5, 2\)"):
        affine_forward(np.zeros((3, 4)), np.zeros((5, 2)), np.zeros(2))


def test_affine_backward_matches_finite_difference(rng):
    x, W, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)
    upstream = rng.normal(size=(3, 2))
    dx, dW, db = affine_backward(x, W, upstream)
    params = {'x': x, 'W': W, 'b': b}
    loss = lambda p: float(np.sum(affine_forward(p['x'], p['W'], p['b']) * upstream))
    assert grad_check(loss, params, {'x': dx, 'W': dW, 'b': db}) < 1e-8


def test_relu_values():
    np.testing.assert_array_equal(activation_forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(activation_backward(np.array([0.0]), np.array([5.0])), [0.0])


def test_relu_backward_matches_finite_difference(rng):
    x = rng.normal(size=(5, 4))
    x[np.abs(x) < 1e-3] = 0.5
    upstream = rng.normal(size=x.shape)
    loss = lambda v: float(np.sum(activation_forward(v) * upstream))
    assert grad_check(loss, x.copy(), activation_backward(x, upstream), eps=1e-6) <= 1e-6


def test_grad_check_quadratic(rng):
    w = rng.normal(size=7)
    assert grad_check(lambda v: float(np.sum(v ** 2)), w, 2.0 * w, eps=1e-5) <= 1e-9


def test_grad_check_detects_wrong_gradient(rng):
    w = rng.normal(size=4)
    assert grad_check(lambda v: float(np.sum(v ** 2)), w, 3.0 * w) > 1e-3


def test_grad_check_rejects_bad_eps(rng):
    w = rng.normal(size=3)
    with pytest.raises(ValueError):
        grad_check(lambda v: float(np.sum(v)), w, np.ones(3), eps=0.1)


def test_grad_check_non_finite_loss():
    with pytest.raises(NumericError):
        grad_check(lambda v: float('nan'), np.ones(2), np.ones(2))


def test_grad_check_restores_params(rng):
    w = rng.normal(size=5)
    before = w.copy()
    grad_check(lambda v: float(np.sum(np.sin(v))), w, np.cos(w))
    np.testing.assert_array_equal(w, before)


def test_matmul_associativity(rng):
    for _ in range(5):
        A, B, C = rng.normal(size=(4, 6)), rng.normal(size=(6, 3)), rng.normal(size=(3, 5))
        left, right = (A @ B) @ C, A @ (B @ C)
        assert np.linalg.norm(left - right) <= 1e-10 * np.linalg.norm(left)


def test_glorot_bounds():
    W = glorot_uniform(30, 20, np.random.default_rng(0))
    limit = np.sqrt(6.0 / 50)
    assert W.shape == (30, 20)
    assert np.all(np.abs(W) <= limit)


def test_add_grads_weights():
    g1 = {'a': np.ones(2)}
    g2 = {'a': np.full(2, 3.0)}
    np.testing.assert_array_equal(add_grads(g1, g2, weights=[2.0, -1.0])['a'], [-1.0, -1.0])


def test_sgd_direction_is_gradient():
    grads = {'a': np.array([1.0, -2.0])}
    assert SgdDirection()(grads) is grads


def test_adam_first_step_is_sign():
    direction = AdamDirection()({'a': np.array([0.5, -4.0, 0.0])})
    np.testing.assert_allclose(direction['a'], [1.0, -1.0, 0.0], atol=1e-6)


def test_make_direction_unknown():
    with pytest.raises(ValueError):
        make_direction('rmsprop')
