"""
Feature-disentangling loss over pairs of encoded signatures.

Same-writer pairs are pulled together by their Gaussian distance; pairs of a
genuine signature and a random forgery are pushed apart until the distance
reaches the margin, after which they stop contributing gradient.
"""
from dataclasses import dataclass

import numpy as np

from .numeric import zeros_like_params
from .vae import encoder_backward, encoder_forward

PAIR_KINDS = ('GG', 'GF')


@dataclass
class PairBatch:
    """
    Paired images, one pair per row.

    ``kind`` is 'GG' (both genuine, same label) or 'GF' (genuine vs random
    forgery, different labels).
    """

    xi: np.ndarray
    xj: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in PAIR_KINDS:
            raise ValueError(f"pair kind must be one of {PAIR_KINDS}, got '{self.kind}'")
        if self.xi.shape != self.xj.shape or self.xi.ndim != 2:
            raise ValueError(f"pair halves must be equal 2-D shapes, got {self.xi.shape} and {self.xj.shape}")

    @property
    def same_label(self):
        return self.kind == 'GG'

    def __len__(self):
        return self.xi.shape[0]

    def images(self):
        """All images of the batch stacked as [xi; xj]."""
        return np.vstack([self.xi, self.xj])


def check_margin(m):
    if not m > 0:
        raise ValueError(f"margin must be positive, got {m}")
    return float(m)


def gauss_distance(a, b):
    """
    Squared distance between two diagonal Gaussians:
    sum((mu_a - mu_b)^2) + sum((sigma_a - sigma_b)^2).

    Works row-wise on batches.
    """
    if a.mu.shape != b.mu.shape:
        raise ValueError(f"gauss_distance: latent shapes differ, {a.mu.shape} vs {b.mu.shape}")
    return np.sum((a.mu - b.mu) ** 2, axis=-1) + np.sum((a.sigma - b.sigma) ** 2, axis=-1)


def fd_pair_loss(d, same_label, m):
    """
    Piecewise pair loss.

    Args:
        d (float): Gaussian distance of the pair, >= 0
        same_label (bool): Whether both images share a label
        m (float): Positive margin

    Returns:
        float: d for same labels, m - d below the margin, m at or above it
    """
    m = check_margin(m)
    if same_label:
        return float(d)
    if d < m:
        return m - float(d)
    return m


def _branch_weights(d, same_label, m):
    # dLoss/dd per pair: +1 pull, -1 push, 0 once the margin is reached
    if same_label:
        return np.ones_like(d)
    return np.where(d < m, -1.0, 0.0)


def fd_head_gradients(mu_i, sigma_i, mu_j, sigma_j, same_label, m):
    """
    Mean pair loss and its gradients w.r.t. both heads of both halves.

    Returns:
        tuple: (loss, d_mu_i, d_sigma_i, d_mu_j, d_sigma_j)
    """
    n = mu_i.shape[0]
    d = np.sum((mu_i - mu_j) ** 2, axis=1) + np.sum((sigma_i - sigma_j) ** 2, axis=1)
    losses = np.array([fd_pair_loss(dk, same_label, m) for dk in d])
    loss = float(np.mean(losses))

    w = (_branch_weights(d, same_label, m) / n)[:, np.newaxis]
    d_mu_i = 2.0 * w * (mu_i - mu_j)
    d_sigma_i = 2.0 * w * (sigma_i - sigma_j)
    return loss, d_mu_i, d_sigma_i, -d_mu_i, -d_sigma_i


def fd_loss_and_grads(params, config, batch, m, encoded=None):
    """
    Disentangling loss of a batch for raw parameters.

    Args:
        params (dict): Model parameters
        config (VaeConfig): Architecture
        batch (PairBatch): Pairs to score
        m (float): Margin
        encoded (tuple, optional): encoder_forward output for batch.images()

    Returns:
        tuple: (loss, grads); decoder gradients are zero
    """
    if len(batch) == 0:
        raise ValueError("fd loss needs a nonempty batch")
    m = check_margin(m)
    n = len(batch)
    mu, logvar, cache = encoded or encoder_forward(params, config, batch.images())
    sigma = np.exp(0.5 * logvar)

    loss, d_mu_i, d_sig_i, d_mu_j, d_sig_j = fd_head_gradients(
        mu[:n], sigma[:n], mu[n:], sigma[n:], batch.same_label, m
    )
    d_mu = np.vstack([d_mu_i, d_mu_j])
    d_logvar = np.vstack([d_sig_i, d_sig_j]) * 0.5 * sigma

    grads = zeros_like_params(params)
    grads.update(encoder_backward(params, cache, d_mu, d_logvar))
    return loss, grads


def fd_batch_loss(model, batch, m):
    """Mean pair loss of ``batch`` under ``model`` with gradients."""
    return fd_loss_and_grads(model.params, model.config, batch, m)
