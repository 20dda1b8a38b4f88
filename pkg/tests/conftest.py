import os

import numpy as np
import pytest

from feature_extractor.vae import VaeConfig, VaeModel
from signature.synthetic import CorpusSpec, gen_corpus

TINY_RUN_CONFIG = {
    'SCHEMA_VERSION': 1,
    'SIDE_H': 16,
    'SIDE_W': 16,
    'HIDDEN_DIMS': '16',
    'LATENT_DIM': 4,
    'ROUNDS': 6,
    'BATCH_SIZE': 4,
    'SEED': 11,
    'PROTOCOL': 'custom',
    'TRAIN_GENUINE': 4,
    'TEST_GENUINE': 0,
    'TEST_SKILLED': 0,
}

SMALL_CORPUS = CorpusSpec(
    n_writers=4,
    genuine_per_writer=6,
    skilled_per_writer=3,
    canvas_h=48,
    canvas_w=96,
    seed=7,
)


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv('FDV_SEED', raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return VaeConfig(input_dim=9, hidden_dims=(5, 5), latent_dim=2)


@pytest.fixture
def tiny_model(tiny_config):
    return VaeModel.initialize(tiny_config, np.random.default_rng(0))


def write_document(path, values):
    with open(path, 'w') as f:
        for key, value in values.items():
            f.write(f'{key}={value}\n')
    return str(path)


@pytest.fixture
def run_config_file(tmp_path):
    """Factory writing a tiny run config; an override of None drops the key."""
    def make(name='run.env', **overrides):
        values = {k: v for k, v in {**TINY_RUN_CONFIG, **overrides}.items() if v is not None}
        return write_document(tmp_path / name, values)
    return make


@pytest.fixture(scope='session')
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp('corpus')
    gen_corpus(SMALL_CORPUS, str(root))
    return str(root)


def _placeholder_dataset(root, writers, genuine, skilled):
    for w in range(writers):
        wid = f'u{w + 1:03d}'
        for kind, count, tag in (('genuine', genuine, 'g'), ('skilled', skilled, 's')):
            directory = os.path.join(root, 'writers', wid, kind)
            os.makedirs(directory, exist_ok=True)
            for k in range(count):
                open(os.path.join(directory, f'{wid}_{tag}{k + 1:02d}.png'), 'wb').close()
    return str(root)


@pytest.fixture
def placeholder_dataset(tmp_path):
    """Factory for a dataset layout of empty image files; enough for split planning."""
    def make(writers, genuine, skilled):
        return _placeholder_dataset(tmp_path / 'data', writers, genuine, skilled)
    return make



def offset_biases(model, rng):
    """Nonzero biases, so that a unit dead on every input does not sit exactly on its ReLU kink."""
    for name, value in model.params.items():
        if value.ndim == 1:
            signs = rng.choice([-1.0, 1.0], size=value.shape)
            model.params[name] = signs * rng.uniform(0.05, 0.3, size=value.shape)
    return model
