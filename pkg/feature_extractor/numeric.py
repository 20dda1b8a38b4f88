"""
Dense-layer arithmetic, analytic gradients and finite-difference checking.

Matrices are plain 64-bit numpy arrays. Every public operation allocates its
output, so arrays handed out are never modified later by this module.
"""
import logging

import numpy as np
from scipy.special import expit

from utils.errors import NumericError

logger = logging.getLogger(__name__)


def _shape_error(op, *shapes):
    described = ', '.join(str(tuple(s)) for s in shapes)
    return ValueError(f"{op}: incompatible shapes {described}")


def affine_forward(x, W, b):
    """
    Compute ``xW + b`` with the bias broadcast over rows.

    Args:
        x (np.ndarray): Input of shape (n, d) or (d,)
        W (np.ndarray): Weights of shape (d, h)
        b (np.ndarray): Bias of shape (h,)

    Returns:
        np.ndarray: Output of shape (n, h) or (h,)

    Raises:
        ValueError: If the shapes do not line up
    """
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise _shape_error("affine_forward", x.shape, W.shape)
    if b.shape != (W.shape[1],):
        raise _shape_error("affine_forward", W.shape, b.shape)
    return x @ W + b


def affine_backward(x, W, upstream):
    """
    Backpropagate through ``xW + b``.

    Args:
        x (np.ndarray): Layer input, shape (n, d)
        W (np.ndarray): Weights, shape (d, h)
        upstream (np.ndarray): Gradient w.r.t. the layer output, shape (n, h)

    Returns:
        tuple: (dx, dW, db)
    """
    if upstream.shape != (x.shape[0], W.shape[1]):
        raise _shape_error("affine_backward", x.shape, W.shape, upstream.shape)
    return upstream @ W.T, x.T @ upstream, upstream.sum(axis=0)


def activation_forward(x):
    """Elementwise ReLU."""
    return np.maximum(x, 0.0)


def activation_backward(x, upstream):
    """ReLU backward pass; the subgradient at 0 is 0."""
    return upstream * (x > 0.0)


def sigmoid(x):
    return expit(x)


def glorot_uniform(fan_in, fan_out, rng):
    """
    Draw a (fan_in, fan_out) weight matrix from
    U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
    """
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def check_finite(value, what):
    """Raise NumericError when ``value`` holds NaN or Inf."""
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite values in {what}")
    return value


def zeros_like_params(params):
    return {name: np.zeros_like(value) for name, value in params.items()}


def add_grads(*grads, weights=None):
    """
    Weighted sum of gradient dicts that share the same keys.

    Args:
        *grads (dict): Gradient dicts keyed by parameter name
        weights (list, optional): Per-dict multipliers, default all 1

    Returns:
        dict: Combined gradients
    """
    weights = weights or [1.0] * len(grads)
    total = {}
    for name in grads[0]:
        acc = weights[0] * grads[0][name]
        for w, g in zip(weights[1:], grads[1:]):
            acc = acc + w * g[name]
        total[name] = acc
    return total


def grad_check(f, params, grads, eps=1e-5, max_coords=None, rng=None):
    """
    Compare analytic gradients against central finite differences.

    Args:
        f (callable): Maps the params dict (or array) to a scalar loss
        params (dict or np.ndarray): Parameters; perturbed in place and restored
        grads (dict or np.ndarray): Analytic gradients, same layout as params
        eps (float): Step size in (0, 1e-2]
        max_coords (int, optional): Coordinates sampled per parameter; all if None
        rng (np.random.Generator, optional): Used when sampling coordinates

    Returns:
        float: max |analytic - numeric| / max(1, |analytic|, |numeric|)

    Raises:
        ValueError: If eps is out of range
        NumericError: If f returns a non-finite value
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"grad_check: eps must lie in (0, 1e-2], got {eps}")

    wrapped = not isinstance(params, dict)
    if wrapped:
        params = {'w': params}
        grads = {'w': grads}
        loss = lambda p: f(p['w'])
    else:
        loss = f

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        analytic_flat = np.asarray(grads[name]).reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))

        for k in coords:
            original = flat[k]
            flat[k] = original + eps
            f_plus = loss(params)
            flat[k] = original - eps
            f_minus = loss(params)
            flat[k] = original

            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(f"grad_check: non-finite loss perturbing {name}[{k}]")

            numeric = (f_plus - f_minus) / (2.0 * eps)
            analytic = analytic_flat[k]
            rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, rel)

    logger.debug(f"grad_check max relative error {worst:.3e}")
    return worst


class SgdDirection:
    """Plain gradient descent: the update direction is the gradient itself."""

    def __call__(self, grads):
        return grads


class AdamDirection:
    """
    Adam preconditioner producing bias-corrected m / (sqrt(v) + eps).

    One instance keeps the moment estimates of one loss term.
    """

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def __call__(self, grads):
        if self.m is None:
            self.m = zeros_like_params(grads)
            self.v = zeros_like_params(grads)
        self.t += 1

        direction = {}
        for name, g in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1.0 - self.beta2 ** self.t)
            direction[name] = m_hat / (np.sqrt(v_hat) + self.eps)
        return direction


OPTIMIZERS = {
    'sgd': SgdDirection,
    'adam': AdamDirection,
}


def make_direction(name):
    try:
        return OPTIMIZERS[name]()
    except KeyError:
        raise ValueError(f"unknown optimizer '{name}', expected one of {sorted(OPTIMIZERS)}")
