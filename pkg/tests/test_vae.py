import numpy as np
import pytest

from conftest import offset_biases
from feature_extractor.numeric import grad_check
from feature_extractor.vae import (
    LatentGaussian, VaeConfig, VaeModel, decode, encode, extract_features, kl_divergence,
    negative_elbo, recon_loss, reparameterize, vae_loss,
)


def test_parameter_shapes_mirror_encoder():
    cfg = VaeConfig(input_dim=16, hidden_dims=(8, 4), latent_dim=2)
    shapes = dict(cfg.parameter_shapes())
    assert shapes['enc_W0'] == (16, 8)
    assert shapes['enc_W_mu'] == (4, 2) and shapes['enc_W_logvar'] == (4, 2)
    assert shapes['dec_W0'] == (2, 4)
    assert shapes['dec_W_out'] == (8, 16)


def test_default_architecture():
    cfg = VaeConfig(input_dim=64 * 64)
    assert cfg.hidden_dims == (200, 200, 200)
    assert cfg.latent_dim == 400


def test_kl_tabulated_cases():
    assert kl_divergence(LatentGaussian(np.zeros(3), np.ones(3))) == 0.0
    assert kl_divergence(LatentGaussian(np.array([1.0]), np.array([1.0]))) == pytest.approx(0.5, abs=1e-12)
    expected = 0.5 * (4.0 - 1.0 - np.log(4.0))
    assert kl_divergence(LatentGaussian(np.array([0.0]), np.array([2.0]))) == pytest.approx(expected, abs=1e-12)


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(21)
    n = 100_000
    for _ in range(10):
        d = int(rng.integers(1, 5))
        lg = LatentGaussian(rng.normal(size=d), rng.uniform(0.3, 2.0, size=d))
        z = lg.mu + lg.sigma * rng.standard_normal((n, d))
        log_q = -0.5 * np.sum(((z - lg.mu) / lg.sigma) ** 2 + np.log(2 * np.pi * lg.sigma ** 2), axis=1)
        log_p = -0.5 * np.sum(z ** 2 + np.log(2 * np.pi), axis=1)
        samples = log_q - log_p
        stderr = samples.std() / np.sqrt(n)
        assert abs(samples.mean() - kl_divergence(lg)) <= 4 * stderr


def test_recon_loss_half():
    x = np.full(10, 0.5)
    assert recon_loss(x, x) == pytest.approx(10 * np.log(2.0), abs=1e-12)


def test_recon_loss_clamps_exact_zero():
    assert recon_loss(np.zeros(4), np.zeros(4)) == pytest.approx(-4 * np.log(1 - 1e-7), abs=1e-12)


def test_recon_loss_matches_loop(rng):
    x, x_hat = rng.random(12), rng.uniform(0.01, 0.99, 12)
    expected = 0.0
    for a, b in zip(x, x_hat):
        expected -= a * np.log(b) + (1 - a) * np.log(1 - b)
    assert recon_loss(x, x_hat) == pytest.approx(expected, abs=1e-12)


def test_encode_deterministic_and_positive(tiny_model, rng):
    x = rng.random(9)
    a, b = encode(tiny_model, x), encode(tiny_model, x)
    np.testing.assert_array_equal(a.mu, b.mu)
    np.testing.assert_array_equal(a.sigma, b.sigma)
    assert np.all(a.sigma > 0)


def test_encode_dimension_mismatch(tiny_model):
    with pytest.raises(ValueError):
        encode(tiny_model, np.zeros(10))
    with pytest.raises(ValueError):
        decode(tiny_model, np.zeros(3))


def test_decode_range(tiny_model, rng):
    out = decode(tiny_model, rng.normal(size=(6, 2)) * 5)
    assert out.shape == (6, 9)
    assert np.all((out > 0) & (out < 1))


def test_hand_computed_tiny_net():
    cfg = VaeConfig(input_dim=2, hidden_dims=(1,), latent_dim=1)
    params = {
        'enc_W0': np.array([[1.0], [-2.0]]), 'enc_b0': np.array([0.5]),
        'enc_W_mu': np.array([[3.0]]), 'enc_b_mu': np.array([-1.0]),
        'enc_W_logvar': np.array([[2.0]]), 'enc_b_logvar': np.array([0.0]),
        'dec_W0': np.array([[1.0]]), 'dec_b0': np.array([0.0]),
        'dec_W_out': np.array([[1.0, -1.0]]), 'dec_b_out': np.array([0.0, 0.0]),
    }
    model = VaeModel(cfg, params)
    # h = relu(0.8 - 0.2 + 0.5) = 1.1
    lg = encode(model, np.array([0.8, 0.1]))
    assert lg.mu[0] == pytest.approx(3.0 * 1.1 - 1.0, abs=1e-12)
    assert lg.sigma[0] == pytest.approx(np.exp(0.5 * 2.2), abs=1e-12)
    out = decode(model, np.array([0.7]))
    np.testing.assert_allclose(out, [1 / (1 + np.exp(-0.7)), 1 / (1 + np.exp(0.7))], atol=1e-12)


def test_reparameterize_degenerate_sigma(rng):
    lg = LatentGaussian(np.array([1.0, -2.0]), np.full(2, 1e-12))
    np.testing.assert_allclose(reparameterize(lg, rng), lg.mu, atol=1e-9)


def test_reparameterize_mean():
    lg = LatentGaussian(np.array([0.5, -1.0, 2.0]), np.array([1.0, 0.2, 3.0]))
    n = 100_000
    samples = reparameterize(LatentGaussian(np.tile(lg.mu, (n, 1)), np.tile(lg.sigma, (n, 1))),
                             np.random.default_rng(4))
    assert np.all(np.abs(samples.mean(axis=0) - lg.mu) <= 4 * lg.sigma / np.sqrt(n))


def test_extract_features_seeded(tiny_model, rng):
    x = rng.random((3, 9))
    a = extract_features(tiny_model, x, np.random.default_rng(5))
    b = extract_features(tiny_model, x, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (3, 2)


def test_vae_loss_nonnegative(tiny_model, rng):
    loss, grads = vae_loss(tiny_model, rng.random((4, 9)), rng)
    assert loss >= 0.0
    assert set(grads) == set(tiny_model.params)


def test_negative_elbo_gradients(tiny_config):
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        model = offset_biases(VaeModel.initialize(tiny_config, rng), rng)
        X = rng.random((3, tiny_config.input_dim))
        eps = rng.standard_normal((3, tiny_config.latent_dim))
        _, grads = negative_elbo(model.params, tiny_config, X, eps)
        loss = lambda p: negative_elbo(p, tiny_config, X, eps)[0]
        assert grad_check(loss, model.params, grads) <= 1e-5


def test_negative_elbo_gradients_with_kl_weight():
    cfg = VaeConfig(input_dim=12, hidden_dims=(5,), latent_dim=2, kl_weight=0.3)
    rng = np.random.default_rng(77)
    model = offset_biases(VaeModel.initialize(cfg, rng), rng)
    X = rng.random((2, 12))
    eps = rng.standard_normal((2, 2))
    _, grads = negative_elbo(model.params, cfg, X, eps)
    assert grad_check(lambda p: negative_elbo(p, cfg, X, eps)[0], model.params, grads) <= 1e-5


def test_perfect_decoder_loss_floor():
    # decoder ignores z and outputs x exactly; mu = 0 and sigma = 1 make KL vanish
    cfg = VaeConfig(input_dim=3, hidden_dims=(2,), latent_dim=1)
    model = VaeModel.initialize(cfg, np.random.default_rng(0))
    x = np.array([0.2, 0.5, 0.9])
    for name in ('enc_W_mu', 'enc_b_mu', 'enc_W_logvar', 'enc_b_logvar', 'dec_W_out'):
        model.params[name] = np.zeros_like(model.params[name])
    model.params['dec_b_out'] = np.log(x / (1 - x))
    loss, _ = vae_loss(model, x, np.random.default_rng(1))
    assert loss == pytest.approx(recon_loss(x, x), abs=1e-9)
