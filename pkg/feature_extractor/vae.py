"""
Fully connected variational autoencoder with hand-written backpropagation.

The encoder maps a flattened signature image to a diagonal Gaussian
(mu, sigma); the decoder maps a latent vector back to pixel probabilities.
Features for the classifier are one reparameterized draw from that Gaussian.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from utils.errors import NumericError
from .numeric import (
    activation_backward,
    activation_forward,
    affine_backward,
    affine_forward,
    glorot_uniform,
    sigmoid,
)

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class VaeConfig:
    """
    Architecture of the encoder/decoder pair.

    Both networks use ``hidden_dims`` ReLU layers (the decoder mirrors the
    encoder); the encoder ends in two affine heads for mu and log-variance,
    the decoder in an affine layer followed by a sigmoid.
    """

    input_dim: int
    hidden_dims: tuple = (200, 200, 200)
    latent_dim: int = 400
    kl_weight: float = 1.0

    def __post_init__(self):
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ValueError(f"input_dim and latent_dim must be >= 1, got {self.input_dim}, {self.latent_dim}")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden_dims must be positive widths, got {self.hidden_dims}")
        object.__setattr__(self, 'hidden_dims', tuple(int(h) for h in self.hidden_dims))

    def to_dict(self):
        return {
            'input_dim': self.input_dim,
            'hidden_dims': list(self.hidden_dims),
            'latent_dim': self.latent_dim,
            'kl_weight': self.kl_weight,
        }

    def parameter_shapes(self):
        """Parameter names and shapes in the declared (persisted) order."""
        shapes = []
        widths = [self.input_dim, *self.hidden_dims]
        for k in range(len(self.hidden_dims)):
            shapes.append((f'enc_W{k}', (widths[k], widths[k + 1])))
            shapes.append((f'enc_b{k}', (widths[k + 1],)))
        top = self.hidden_dims[-1]
        shapes += [
            ('enc_W_mu', (top, self.latent_dim)),
            ('enc_b_mu', (self.latent_dim,)),
            ('enc_W_logvar', (top, self.latent_dim)),
            ('enc_b_logvar', (self.latent_dim,)),
        ]
        widths = [self.latent_dim, *reversed(self.hidden_dims)]
        for k in range(len(self.hidden_dims)):
            shapes.append((f'dec_W{k}', (widths[k], widths[k + 1])))
            shapes.append((f'dec_b{k}', (widths[k + 1],)))
        shapes += [
            ('dec_W_out', (widths[-1], self.input_dim)),
            ('dec_b_out', (self.input_dim,)),
        ]
        return shapes


@dataclass
class LatentGaussian:
    """Encoder output: mean and standard deviation, one row per image."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ValueError(f"mu and sigma shapes differ: {self.mu.shape} vs {self.sigma.shape}")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma))):
            raise NumericError("LatentGaussian holds non-finite values")
        if not np.all(self.sigma > 0.0):
            raise ValueError("sigma must be strictly positive")

    @classmethod
    def from_logvar(cls, mu, logvar):
        return cls(mu=mu, sigma=np.exp(0.5 * logvar))

    @property
    def dim(self):
        return self.mu.shape[-1]


@dataclass
class VaeModel:
    """Encoder and decoder parameters plus the architecture they belong to."""

    config: VaeConfig
    params: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, config, rng):
        """
        Glorot-uniform weights and zero biases, drawn in declared order.

        Args:
            config (VaeConfig): Architecture
            rng (np.random.Generator): Seeded generator

        Returns:
            VaeModel: Freshly initialised model
        """
        params = {}
        for name, shape in config.parameter_shapes():
            if len(shape) == 2:
                params[name] = glorot_uniform(shape[0], shape[1], rng)
            else:
                params[name] = np.zeros(shape)
        return cls(config=config, params=params)

    def copy(self):
        return VaeModel(config=self.config, params={k: v.copy() for k, v in self.params.items()})


# ----------------------------------------------------------------------------
# Forward / backward passes over batches (rows = images)
# ----------------------------------------------------------------------------

def _as_batch(x, expected_dim, what):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[np.newaxis, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != expected_dim:
        raise ValueError(f"{what}: expected vectors of length {expected_dim}, got shape {x.shape}")
    return batch, single


def _stack_forward(params, prefix, n_layers, h):
    cache = []
    for k in range(n_layers):
        pre = affine_forward(h, params[f'{prefix}_W{k}'], params[f'{prefix}_b{k}'])
        cache.append((h, pre))
        h = activation_forward(pre)
    return h, cache


def _stack_backward(params, prefix, cache, upstream, grads):
    for k in reversed(range(len(cache))):
        h_in, pre = cache[k]
        d_pre = activation_backward(pre, upstream)
        upstream, grads[f'{prefix}_W{k}'], grads[f'{prefix}_b{k}'] = affine_backward(
            h_in, params[f'{prefix}_W{k}'], d_pre
        )
    return upstream


def encoder_forward(params, config, X):
    """
    Returns:
        tuple: (mu, logvar, cache) for a batch X of shape (n, input_dim)
    """
    top, cache = _stack_forward(params, 'enc', len(config.hidden_dims), X)
    mu = affine_forward(top, params['enc_W_mu'], params['enc_b_mu'])
    logvar = affine_forward(top, params['enc_W_logvar'], params['enc_b_logvar'])
    return mu, logvar, (top, cache)


def encoder_backward(params, cache, d_mu, d_logvar):
    """Gradients of the encoder parameters given head gradients."""
    top, stack_cache = cache
    grads = {}
    d_top_mu, grads['enc_W_mu'], grads['enc_b_mu'] = affine_backward(top, params['enc_W_mu'], d_mu)
    d_top_lv, grads['enc_W_logvar'], grads['enc_b_logvar'] = affine_backward(
        top, params['enc_W_logvar'], d_logvar
    )
    _stack_backward(params, 'enc', stack_cache, d_top_mu + d_top_lv, grads)
    return grads


def decoder_forward(params, config, Z):
    """
    Returns:
        tuple: (x_hat, cache) for latent rows Z of shape (n, latent_dim)
    """
    top, cache = _stack_forward(params, 'dec', len(config.hidden_dims), Z)
    logits = affine_forward(top, params['dec_W_out'], params['dec_b_out'])
    return sigmoid(logits), (top, cache)


def decoder_backward(params, cache, d_logits):
    """Returns (dZ, decoder grads)."""
    top, stack_cache = cache
    grads = {}
    d_top, grads['dec_W_out'], grads['dec_b_out'] = affine_backward(top, params['dec_W_out'], d_logits)
    d_z = _stack_backward(params, 'dec', stack_cache, d_top, grads)
    return d_z, grads


# ----------------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------------

def encode(model, x):
    """
    Encode one image (1-D) or a batch (2-D) into a LatentGaussian.

    Args:
        model (VaeModel): Model to use
        x (np.ndarray): Flattened normalized image(s), values in [0, 1]

    Returns:
        LatentGaussian: sigma = exp(0.5 * logvar)
    """
    X, single = _as_batch(x, model.config.input_dim, "encode")
    mu, logvar, _ = encoder_forward(model.params, model.config, X)
    if single:
        mu, logvar = mu[0], logvar[0]
    return LatentGaussian.from_logvar(mu, logvar)


def reparameterize(lg, rng):
    """Draw z = mu + sigma * eps with eps ~ N(0, I)."""
    eps = rng.standard_normal(lg.mu.shape)
    return lg.mu + lg.sigma * eps


def decode(model, z):
    """Map latent vector(s) to pixel probabilities in (0, 1)."""
    Z, single = _as_batch(z, model.config.latent_dim, "decode")
    x_hat, _ = decoder_forward(model.params, model.config, Z)
    return x_hat[0] if single else x_hat


def kl_divergence(lg):
    """KL(N(mu, sigma^2) || N(0, I)), summed over latent coordinates."""
    var = lg.sigma ** 2
    return 0.5 * np.sum(lg.mu ** 2 + var - 1.0 - np.log(var), axis=-1)


def recon_loss(x, x_hat):
    """Summed Bernoulli cross-entropy, predictions clamped to [1e-7, 1 - 1e-7]."""
    x = np.asarray(x, dtype=np.float64)
    p = np.clip(x_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -np.sum(x * np.log(p) + (1.0 - x) * np.log(1.0 - p), axis=-1)


def negative_elbo(params, config, X, eps, encoded=None):
    """
    Mean negative ELBO of a batch for a fixed noise draw, with gradients.

    Args:
        params (dict): Model parameters
        config (VaeConfig): Architecture
        X (np.ndarray): Batch of images, shape (n, input_dim)
        eps (np.ndarray): Standard-normal noise, shape (n, latent_dim)
        encoded (tuple, optional): Reused output of encoder_forward

    Returns:
        tuple: (loss, grads) with grads for every parameter
    """
    n = X.shape[0]
    mu, logvar, enc_cache = encoded or encoder_forward(params, config, X)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    x_hat, dec_cache = decoder_forward(params, config, z)

    p = np.clip(x_hat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    recon = -np.sum(X * np.log(p) + (1.0 - X) * np.log(1.0 - p), axis=1)
    kl = 0.5 * np.sum(mu ** 2 + np.exp(logvar) - 1.0 - logvar, axis=1)
    loss = float(np.mean(recon + config.kl_weight * kl))

    unclamped = (x_hat >= PROB_CLAMP) & (x_hat <= 1.0 - PROB_CLAMP)
    d_logits = (x_hat - X) * unclamped / n
    d_z, grads = decoder_backward(params, dec_cache, d_logits)

    d_mu = d_z + config.kl_weight * mu / n
    d_logvar = d_z * eps * 0.5 * sigma + config.kl_weight * 0.5 * (np.exp(logvar) - 1.0) / n
    grads.update(encoder_backward(params, enc_cache, d_mu, d_logvar))
    return loss, grads


def vae_loss(model, x, rng):
    """
    Single-sample estimate of the mean negative ELBO and its gradients.

    Args:
        model (VaeModel): Model to evaluate
        x (np.ndarray): One image or a batch of images
        rng (np.random.Generator): Source of the reparameterization noise

    Returns:
        tuple: (loss, grads)

    Raises:
        NumericError: If the loss is not finite
    """
    X, _ = _as_batch(x, model.config.input_dim, "vae_loss")
    eps = rng.standard_normal((X.shape[0], model.config.latent_dim))
    loss, grads = negative_elbo(model.params, model.config, X, eps)
    if not np.isfinite(loss):
        raise NumericError(f"vae_loss is not finite ({loss})")
    return loss, grads


def extract_features(model, x, rng):
    """
    Feature vector(s) f(x) = mu + sigma * N(0, I): one stochastic draw per call.
    """
    return reparameterize(encode(model, x), rng)
